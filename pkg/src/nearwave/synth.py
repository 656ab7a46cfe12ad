"""Seeded synthetic catalogs with known ground truth.

``gen_poisson`` draws a homogeneous space-time Poisson catalog, which follows
the random-event null exactly. ``gen_excited`` draws a multi-class
self-exciting cluster process: background events per class, each event
spawning Poisson offspring of every class with exponential delays and
Gaussian displacements.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .catalog import Event, parse_date
from .geo import EARTH_RADIUS_KM, GeoPoint


@dataclass(frozen=True)
class Region:
    center: GeoPoint
    radius_km: float

    def __post_init__(self):
        if not self.radius_km > 0:
            raise ValueError("region radius must be positive")


@dataclass(frozen=True)
class PoissonSpec:
    rate: float  # events per day
    region: Region
    start: dt.date
    end: dt.date  # inclusive
    class_label: str = "A"
    casualty_mean: float = 1.0

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be nonnegative")
        if self.end < self.start:
            raise ValueError("empty span")

    @property
    def span_days(self) -> int:
        return (self.end - self.start).days + 1


@dataclass
class ExcitationSpec:
    """Multi-class cluster process.

    ``alpha[i][j]`` is the expected number of class-``j`` offspring of one
    class-``i`` event. ``tau`` (mean delay, days), ``sigma`` (displacement
    scale, km) and ``delay_offset`` (fixed latency added before the
    exponential delay, days) are scalars or per-pair matrices.
    ``chain_boost`` multiplies the rate at which an event answers back to
    the class of its own parent, e.g. B's response to an A attack that was
    itself provoked by B.
    """

    classes: Sequence[str]
    background: Sequence[float]  # events per day per class
    alpha: Sequence[Sequence[float]]
    tau: object = 10.0
    sigma: object = 5.0
    region: Region = None
    start: dt.date = dt.date(2014, 2, 2)
    end: dt.date = dt.date(2017, 12, 31)
    delay_offset: object = 0.0
    chain_boost: float = 1.0
    casualty_mean: float = 1.0

    def __post_init__(self):
        k = len(self.classes)
        self.background = np.asarray(self.background, dtype=float)
        self.alpha = np.asarray(self.alpha, dtype=float)
        if self.background.shape != (k,) or self.alpha.shape != (k, k):
            raise ValueError("background / alpha shapes do not match classes")
        if np.any(self.alpha < 0) or np.any(self.background < 0):
            raise ValueError("rates must be nonnegative")
        self.tau = np.broadcast_to(np.asarray(self.tau, dtype=float), (k, k)).copy()
        self.sigma = np.broadcast_to(np.asarray(self.sigma, dtype=float), (k, k)).copy()
        self.delay_offset = np.broadcast_to(np.asarray(self.delay_offset, dtype=float), (k, k)).copy()
        active = self.alpha > 0
        if np.any(self.tau[active] <= 0) or np.any(self.sigma < 0) or np.any(self.delay_offset < 0):
            raise ValueError("tau must be positive, sigma and delay_offset nonnegative")
        if self.region is None:
            raise ValueError("region required")
        if self.end < self.start:
            raise ValueError("empty span")
        if self.chain_boost < 0:
            raise ValueError("chain_boost must be nonnegative")
        if self.spectral_radius() >= 1.0:
            raise ValueError(f"supercritical branching (spectral radius {self.spectral_radius():.3f})")

    @property
    def span_days(self) -> int:
        return (self.end - self.start).days + 1

    def spectral_radius(self) -> float:
        a = self.alpha.copy()
        if self.chain_boost > 1:
            off = ~np.eye(len(a), dtype=bool)
            a[off] *= self.chain_boost
        return float(np.max(np.abs(np.linalg.eigvals(a)))) if a.size else 0.0

    def expected_counts(self) -> np.ndarray:
        """Expected events per class ignoring truncation at the span end."""
        return self.background * self.span_days @ np.linalg.inv(np.eye(len(self.alpha)) - self.alpha)


def sample_cap(center: GeoPoint, radius_km: float, n: int, rng,
               earth_radius_km: float = EARTH_RADIUS_KM) -> tuple[np.ndarray, np.ndarray]:
    """Uniform points over a spherical cap, as (lat, lon) degree arrays."""
    cos_max = np.cos(min(radius_km / earth_radius_km, np.pi))
    cos_c = 1.0 - rng.random(n) * (1.0 - cos_max)
    dist = np.arccos(np.clip(cos_c, -1.0, 1.0)) * earth_radius_km
    bearing = rng.random(n) * 2 * np.pi
    return destination(np.full(n, center.lat), np.full(n, center.lon), dist, bearing,
                       earth_radius_km)


def destination(lat, lon, dist_km, bearing, earth_radius_km: float = EARTH_RADIUS_KM):
    """Point reached from (lat, lon) along ``bearing`` (radians) after ``dist_km``."""
    phi1 = np.radians(lat)
    lam1 = np.radians(lon)
    delta = np.asarray(dist_km, dtype=float) / earth_radius_km
    sin_phi2 = np.sin(phi1) * np.cos(delta) + np.cos(phi1) * np.sin(delta) * np.cos(bearing)
    phi2 = np.arcsin(np.clip(sin_phi2, -1.0, 1.0))
    lam2 = lam1 + np.arctan2(np.sin(bearing) * np.sin(delta) * np.cos(phi1),
                             np.cos(delta) - np.sin(phi1) * sin_phi2)
    lon2 = (np.degrees(lam2) + 180.0) % 360.0 - 180.0
    return np.degrees(phi2), lon2


def _events(days, lat, lon, labels, casualties, start: dt.date, prefix: str) -> list[Event]:
    order = np.lexsort((lon, lat, labels, days))
    base = start.toordinal()
    width = max(6, len(str(len(days))))
    out = []
    for n, i in enumerate(order):
        out.append(Event(
            id=f"{prefix}{n:0{width}d}",
            date=dt.date.fromordinal(base + int(days[i])),
            location=GeoPoint(lon=float(lon[i]), lat=float(lat[i])),
            perpetrators=(str(labels[i]),),
            casualties=int(casualties[i]),
        ))
    return out


def gen_poisson(spec: PoissonSpec, seed: int) -> list[Event]:
    """Homogeneous Poisson catalog: uniform dates over the span, uniform over the cap."""
    rng = np.random.default_rng(seed)
    n = rng.poisson(spec.rate * spec.span_days)
    days = rng.integers(0, spec.span_days, size=n)
    lat, lon = sample_cap(spec.region.center, spec.region.radius_km, n, rng)
    cas = rng.poisson(spec.casualty_mean, size=n)
    labels = np.full(n, spec.class_label, dtype=object)
    return _events(days, lat, lon, labels, cas, spec.start, f"{spec.class_label}-")


@dataclass
class ExcitedCatalog:
    events: list[Event]
    parent: dict = field(default_factory=dict)  # event id -> parent id (absent: background)


def simulate_excited(spec: ExcitationSpec, seed: int) -> ExcitedCatalog:
    """Cluster-process sample that also records each offspring's parent."""
    rng = np.random.default_rng(seed)
    k = len(spec.classes)
    span = spec.span_days

    days, lat, lon, cls, parent = [], [], [], [], []
    n_bg = rng.poisson(spec.background * span)
    for c in range(k):
        days.append(rng.integers(0, span, size=n_bg[c]))
        la, lo = sample_cap(spec.region.center, spec.region.radius_km, n_bg[c], rng)
        lat.append(la)
        lon.append(lo)
        cls.append(np.full(n_bg[c], c))
        parent.append(np.full(n_bg[c], -1))
    days = np.concatenate(days)
    lat = np.concatenate(lat)
    lon = np.concatenate(lon)
    cls = np.concatenate(cls).astype(np.int64)
    parent = np.concatenate(parent).astype(np.int64)

    gen = np.arange(len(days))
    while len(gen):
        g_cls = cls[gen]
        g_parent_cls = np.where(parent[gen] >= 0, cls[np.maximum(parent[gen], 0)], -1)
        new = [[] for _ in range(5)]
        for c2 in range(k):
            rate = spec.alpha[g_cls, c2].copy()
            # answering back to the class that provoked this event
            rate[(g_parent_cls == c2) & (g_cls != c2)] *= spec.chain_boost
            n_kids = rng.poisson(rate)
            if not n_kids.sum():
                continue
            par = np.repeat(gen, n_kids)
            pc = cls[par]
            raw = spec.delay_offset[pc, c2] + rng.exponential(np.maximum(spec.tau[pc, c2], 1e-12))
            delay = np.maximum(1, np.ceil(raw)).astype(np.int64)
            kid_days = days[par] + delay
            r = rng.normal(size=(len(par), 2)) * spec.sigma[pc, c2][:, None]
            step = np.hypot(r[:, 0], r[:, 1])
            bearing = rng.random(len(par)) * 2 * np.pi
            kl, ko = destination(lat[par], lon[par], step, bearing)
            keep = kid_days < span
            for lst, arr in zip(new, (kid_days, kl, ko, np.full(len(par), c2), par)):
                lst.append(arr[keep])
        if not any(len(a) for a in new[0]):
            break
        first = len(days)
        days = np.concatenate([days, *new[0]])
        lat = np.concatenate([lat, *new[1]])
        lon = np.concatenate([lon, *new[2]])
        cls = np.concatenate([cls, *new[3]]).astype(np.int64)
        parent = np.concatenate([parent, *new[4]]).astype(np.int64)
        gen = np.arange(first, len(days))

    cas_mean = np.broadcast_to(np.asarray(spec.casualty_mean, dtype=float), (k,))
    cas = rng.poisson(cas_mean[cls])
    labels = np.array(spec.classes, dtype=object)[cls]
    order = np.lexsort((lon, lat, labels, days))
    events = _events(days, lat, lon, labels, cas, spec.start, "x-")
    id_of = {int(i): e.id for i, e in zip(order, events)}
    parents = {id_of[i]: id_of[int(p)] for i, p in enumerate(parent) if p >= 0}
    return ExcitedCatalog(events, parents)


def gen_excited(spec: ExcitationSpec, seed: int) -> list[Event]:
    return simulate_excited(spec, seed).events


def _region(cfg: Mapping) -> Region:
    c = cfg["center"]
    return Region(GeoPoint(lon=c[0], lat=c[1]), float(cfg["radius_km"]))


def spec_from_dict(cfg: Mapping):
    """Build a generator spec from a JSON-style mapping.

    ``{"kind": "poisson", "rate", "region": {"center": [lon, lat], "radius_km"},
    "start", "end", "class"}`` or ``{"kind": "excited", "classes",
    "background", "alpha", "tau", "sigma", "delay_offset", "chain_boost",
    "region", "start", "end"}``.
    """
    kind = cfg.get("kind", "poisson")
    if kind == "poisson":
        return PoissonSpec(
            rate=float(cfg["rate"]), region=_region(cfg["region"]),
            start=parse_date(cfg["start"]), end=parse_date(cfg["end"]),
            class_label=cfg.get("class", "A"), casualty_mean=float(cfg.get("casualty_mean", 1.0)))
    if kind == "excited":
        return ExcitationSpec(
            classes=list(cfg["classes"]), background=cfg["background"], alpha=cfg["alpha"],
            tau=cfg.get("tau", 10.0), sigma=cfg.get("sigma", 5.0),
            delay_offset=cfg.get("delay_offset", 0.0), chain_boost=float(cfg.get("chain_boost", 1.0)),
            region=_region(cfg["region"]), start=parse_date(cfg["start"]),
            end=parse_date(cfg["end"]), casualty_mean=cfg.get("casualty_mean", 1.0))
    raise ValueError(f"unknown generator kind {kind!r}")


def generate(spec, seed: int) -> list[Event]:
    if isinstance(spec, PoissonSpec):
        return gen_poisson(spec, seed)
    return gen_excited(spec, seed)


def load_spec(path):
    return spec_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
