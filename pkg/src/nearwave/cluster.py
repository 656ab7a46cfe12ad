"""Geodesic k-means, elbow selection of k and spread-based membership."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geo import EARTH, EarthModel, GeoPoint, from_unit_vectors, haversine_km, to_unit_vectors

logger = logging.getLogger(__name__)

MAX_ITER = 300
DISCARDED = "discarded"


@dataclass
class ClusterModel:
    k: int
    centroids: list[GeoPoint]
    labels: np.ndarray  # cluster index per input point
    spreads: np.ndarray  # rms great-circle distance to centroid, km
    dbar: float
    ids: Optional[list[str]] = None
    iterations: int = 0

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    @property
    def assignments(self) -> dict:
        keys = self.ids if self.ids is not None else range(len(self.labels))
        return {key: int(c) for key, c in zip(keys, self.labels)}


@dataclass
class ElbowCurve:
    ks: list[int]
    dbar: list[float]
    improvement: list[float]  # I_k for k in ks[:-1]
    k_star: int
    elbow_found: bool = True
    models: dict = field(default_factory=dict, repr=False)

    def table(self) -> list[dict]:
        rows = []
        for i, k in enumerate(self.ks):
            rows.append({"k": k, "dbar_km": self.dbar[i],
                         "I_k": self.improvement[i] if i < len(self.improvement) else None})
        return rows


def _as_arrays(points: Sequence[GeoPoint]) -> tuple[np.ndarray, np.ndarray]:
    lat = np.array([p.lat for p in points], dtype=float)
    lon = np.array([p.lon for p in points], dtype=float)
    return lat, lon


def _nearest(xyz, centers):
    # max dot product == min great-circle distance
    return np.argmax(xyz @ centers.T, axis=1)


def _angle_sq(xyz, centers, labels):
    dots = np.einsum("ij,ij->i", xyz, centers[labels])
    return np.arccos(np.clip(dots, -1.0, 1.0)) ** 2


def _init_centers(xyz, uniq, k, rng):
    """k-means++ seeding restricted to distinct locations."""
    first = rng.integers(len(uniq))
    chosen = [first]
    d2 = np.arccos(np.clip(xyz[uniq] @ xyz[uniq[first]], -1, 1)) ** 2
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            remaining = np.setdiff1d(np.arange(len(uniq)), chosen)
            nxt = int(rng.choice(remaining))
        else:
            nxt = int(rng.choice(len(uniq), p=d2 / total))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.arccos(np.clip(xyz[uniq] @ xyz[uniq[nxt]], -1, 1)) ** 2)
    return xyz[uniq[chosen]].copy()


def _lloyd(xyz, centers, max_iter=MAX_ITER):
    k = len(centers)
    labels = _nearest(xyz, centers)
    for it in range(1, max_iter + 1):
        for c in range(k):
            if not np.any(labels == c):
                # empty cluster: re-seed at the point farthest from its centroid
                far = int(np.argmax(_angle_sq(xyz, centers, labels)))
                centers[c] = xyz[far]
                labels[far] = c
        sums = np.zeros((k, 3))
        np.add.at(sums, labels, xyz)
        norms = np.linalg.norm(sums, axis=1, keepdims=True)
        ok = norms[:, 0] > 1e-15
        centers[ok] = sums[ok] / norms[ok]
        new = _nearest(xyz, centers)
        if np.array_equal(new, labels):
            return centers, labels, it
        labels = new
    return centers, labels, max_iter


def _restart(xyz, uniq, k, seed_seq):
    rng = np.random.default_rng(seed_seq)
    centers = _init_centers(xyz, uniq, k, rng)
    centers, labels, it = _lloyd(xyz, centers)
    inertia = float(np.mean(_angle_sq(xyz, centers, labels)))
    return inertia, centers, labels, it


def kmeans(points: Sequence[GeoPoint], k: int, seed: int = 0, restarts: int = 16,
           earth: EarthModel = EARTH, ids: Optional[Sequence[str]] = None,
           threads: int = 1) -> ClusterModel:
    """Lloyd k-means with great-circle distances and unit-vector centroids.

    The best of ``restarts`` seeded initializations (lowest rms distance to
    the assigned centroid) is returned; ties go to the lower restart index so
    the result does not depend on ``threads``.

    Raises:
        ValueError: ``k < 1`` or fewer distinct locations than ``k``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    lat, lon = _as_arrays(points)
    xyz = to_unit_vectors(lat, lon)
    _, uniq = np.unique(np.round(xyz, 12), axis=0, return_index=True)
    uniq = np.sort(uniq)
    if len(uniq) < k:
        raise ValueError(f"{len(uniq)} distinct points cannot form {k} clusters")

    seeds = np.random.SeedSequence(seed).spawn(restarts)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda s: _restart(xyz, uniq, k, s), seeds))
    else:
        results = [_restart(xyz, uniq, k, s) for s in seeds]
    best = min(range(restarts), key=lambda i: (results[i][0], i))
    _, centers, labels, it = results[best]

    clat, clon = from_unit_vectors(centers)
    centroids = [GeoPoint(lon=float(a), lat=float(b)) for a, b in zip(clon, clat)]
    d = haversine_km(lat, lon, clat[labels], clon[labels], earth.radius_km)
    spreads = np.array([np.sqrt(np.mean(d[labels == c] ** 2)) if np.any(labels == c) else 0.0
                        for c in range(k)])
    return ClusterModel(k, centroids, labels, spreads, float(np.sqrt(np.mean(d**2))),
                        list(ids) if ids is not None else None, it)


def elbow_select(points: Sequence[GeoPoint], k_max: int, threshold: float = 0.075,
                 seed: int = 0, restarts: int = 16, earth: EarthModel = EARTH,
                 threads: int = 1) -> ElbowCurve:
    """Choose k from the relative improvement ``I_k = |dbar_{k+1} - dbar_k| / dbar_k``.

    ``k*`` is the smallest k whose ``I_j`` stays below ``threshold`` for every
    ``j`` from k to ``k_max``. k runs up to ``k_max + 1`` but never past the
    number of distinct locations (where dbar is already 0). ``I_k`` is 0 once
    dbar_k reaches 0.
    """
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    lat, lon = _as_arrays(points)
    n_distinct = len(np.unique(np.round(to_unit_vectors(lat, lon), 12), axis=0))
    ks = list(range(1, min(k_max + 1, n_distinct) + 1))
    models = {k: kmeans(points, k, seed=seed, restarts=restarts, earth=earth, threads=threads)
              for k in ks}
    dbar = [models[k].dbar for k in ks]
    for i in range(1, len(dbar)):
        if dbar[i] > dbar[i - 1]:
            logger.warning("dbar increased from k=%d to k=%d; consider more restarts",
                           ks[i - 1], ks[i])
    imp = [abs(dbar[i + 1] - dbar[i]) / dbar[i] if dbar[i] > 0 else 0.0
           for i in range(len(ks) - 1)]
    last = min(k_max, len(imp))
    k_star, found = (1, True) if last == 0 else (None, False)
    for k in range(1, last + 1):
        if all(imp[j - 1] < threshold for j in range(k, last + 1)):
            k_star, found = k, True
            break
    if k_star is None:
        k_star = min(k_max, ks[-1])
    return ElbowCurve(ks, dbar, imp, k_star, found, models)


def assign_by_spread(model: ClusterModel, extra: Sequence[tuple[str, GeoPoint]],
                     multiplier: float = 3.0, earth: EarthModel = EARTH) -> dict:
    """Attach extra events to their nearest cluster when within ``multiplier`` spreads.

    Returns ``{event_id: cluster_index or "discarded"}``. A zero-spread
    cluster accepts only points at its exact location.
    """
    if not extra:
        return {}
    clat = np.array([c.lat for c in model.centroids])
    clon = np.array([c.lon for c in model.centroids])
    out = {}
    for eid, p in extra:
        d = haversine_km(p.lat, p.lon, clat, clon, earth.radius_km)
        c = int(np.argmin(d))
        out[eid] = c if d[c] <= multiplier * model.spreads[c] else DISCARDED
    return out
