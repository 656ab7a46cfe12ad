"""Fixed-window latent-time pair enumeration.

Pairs are (source, target) events with the target strictly later than the
source, both inside the same window, within a distance band, and passing
optional casualty filters. When source and target class coincide every
unordered pair shows up once, oriented chronologically.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

import numpy as np

from .catalog import ClassifiedCatalog
from .geo import EARTH, EarthModel, haversine_km

DEFAULT_WINDOW_WEEKS = 44
DEFAULT_MAX_KM = 20.0
DEFAULT_MIN_KM = 100.0
DEFAULT_MIN_PAIRS = 100

_BLOCK = 1 << 21  # max entries of a distance block


@dataclass(frozen=True)
class WindowSpec:
    start_date: dt.date
    window_weeks: int = DEFAULT_WINDOW_WEEKS
    window_count: Optional[int] = None  # None: as many whole windows as fit

    def __post_init__(self):
        if self.window_weeks < 1:
            raise ValueError("window_weeks must be positive")
        if self.window_count is not None and self.window_count < 1:
            raise ValueError("window_count must be positive")

    @property
    def days(self) -> int:
        return 7 * self.window_weeks

    def bounds(self, end_date: Optional[dt.date] = None) -> list[tuple[int, int]]:
        """Half-open ``[first, last + 1)`` day-ordinal ranges of the windows.

        Without an explicit ``window_count`` only windows lying entirely on or
        before ``end_date`` are produced.
        """
        start = self.start_date.toordinal()
        if self.window_count is not None:
            count = self.window_count
        else:
            if end_date is None:
                raise ValueError("end_date needed to fill the span")
            count = (end_date.toordinal() - start + 1) // self.days
        if count < 1:
            raise ValueError("empty window range")
        return [(start + i * self.days, start + (i + 1) * self.days) for i in range(count)]


@dataclass(frozen=True)
class PairFilter:
    source_class: str
    target_class: str
    max_km: Optional[float] = None
    min_km: Optional[float] = None
    min_casualties_source: Optional[int] = None
    min_casualties_target: Optional[int] = None
    incremental: bool = False

    def __post_init__(self):
        if self.max_km is None and self.min_km is None:
            object.__setattr__(self, "max_km", DEFAULT_MAX_KM)
        if (self.max_km is None) == (self.min_km is None):
            raise ValueError("set exactly one of max_km / min_km")
        for v in (self.min_casualties_source, self.min_casualties_target):
            if v is not None and v < 0:
                raise ValueError("casualty thresholds must be nonnegative")

    @property
    def near_repeat(self) -> bool:
        return self.source_class == self.target_class

    def band_label(self) -> str:
        return f"max_km={self.max_km:g}" if self.max_km is not None else f"min_km={self.min_km:g}"


class LatentPair(NamedTuple):
    source_id: str
    target_id: str
    latent_days: int
    distance_km: float
    window: int


class PairTable:
    """Column store of latent pairs; iterating yields :class:`LatentPair`."""

    def __init__(self, catalog: ClassifiedCatalog, source, target, latent, distance, window):
        self.catalog = catalog
        self.source = np.asarray(source, dtype=np.int64)
        self.target = np.asarray(target, dtype=np.int64)
        self.latent_days = np.asarray(latent, dtype=np.int64)
        self.distance_km = np.asarray(distance, dtype=float)
        self.window = np.asarray(window, dtype=np.int64)

    def __len__(self):
        return len(self.source)

    def __iter__(self):
        ids = self.catalog.ids
        for s, t, lag, d, w in zip(self.source, self.target, self.latent_days,
                                   self.distance_km, self.window):
            yield LatentPair(ids[s], ids[t], int(lag), float(d), int(w))

    def select(self, mask) -> "PairTable":
        return PairTable(self.catalog, self.source[mask], self.target[mask],
                         self.latent_days[mask], self.distance_km[mask], self.window[mask])

    def keys(self) -> list[tuple]:
        return [(p.window, p.source_id, p.target_id, p.latent_days) for p in self]

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["window", "source_id", "target_id", "latent_days", "distance_km"])
            for p in self:
                w.writerow([p.window, p.source_id, p.target_id, p.latent_days,
                            f"{p.distance_km:.6f}"])


def _cell_lon_halfwidth(theta_deg: float, abs_lat_max: float) -> Optional[float]:
    """Largest longitude offset (deg) of a point within ``theta`` of a point at latitude
    up to ``abs_lat_max``; ``None`` when the cap reaches a pole."""
    c = math.cos(math.radians(min(abs_lat_max, 90.0)))
    s = math.sin(math.radians(theta_deg))
    if c <= s:
        return None
    return math.degrees(math.asin(s / c))


def close_pairs(lat, lon, src, tgt, max_km: float, earth: EarthModel = EARTH):
    """All (source, target) position pairs within ``max_km`` of each other.

    Positions are bucketed into a latitude/longitude grid whose cell side is
    the angular radius of ``max_km``; each source cell only scans the
    neighbouring rows and the longitude span its cap can reach.

    Returns:
        ``(s, t, d)`` arrays of positions and distances in km.
    """
    src = np.asarray(src, dtype=np.int64)
    tgt = np.asarray(tgt, dtype=np.int64)
    empty = (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
    if len(src) == 0 or len(tgt) == 0:
        return empty
    theta = math.degrees(max_km / earth.radius_km)
    if theta >= 45.0:
        return _all_pairs(lat, lon, src, tgt, earth, lambda d: d <= max_km)

    cell = theta * (1 + 1e-9) + 1e-12
    nrow = int(math.ceil(180.0 / cell))
    ncol = int(math.ceil(360.0 / cell))

    def rows_cols(idx):
        r = np.minimum(((lat[idx] + 90.0) // cell).astype(np.int64), nrow - 1)
        c = np.minimum(((lon[idx] + 180.0) // cell).astype(np.int64), ncol - 1)
        return r, c

    tr, tc = rows_cols(tgt)
    order = np.lexsort((tc, tr))
    tgt_sorted, tr, tc = tgt[order], tr[order], tc[order]
    keys = tr * ncol + tc
    uniq_keys, starts = np.unique(keys, return_index=True)
    ends = np.append(starts[1:], len(keys))
    buckets = {int(k): tgt_sorted[a:b] for k, a, b in zip(uniq_keys, starts, ends)}
    row_cols: dict[int, np.ndarray] = {}
    for k in buckets:
        row_cols.setdefault(k // ncol, []).append(k % ncol)
    row_cols = {r: np.array(sorted(cs)) for r, cs in row_cols.items()}

    sr, sc = rows_cols(src)
    s_order = np.lexsort((sc, sr))
    src_sorted = src[s_order]
    s_keys = sr[s_order] * ncol + sc[s_order]
    s_uniq, s_starts = np.unique(s_keys, return_index=True)
    s_ends = np.append(s_starts[1:], len(s_keys))

    out_s, out_t, out_d = [], [], []
    for key, a, b in zip(s_uniq, s_starts, s_ends):
        r, c = divmod(int(key), ncol)
        lat_lo = -90.0 + r * cell
        lat_hi = min(lat_lo + cell, 90.0)
        half = _cell_lon_halfwidth(theta, max(abs(lat_lo), abs(lat_hi)))
        cands = []
        for rr in (r - 1, r, r + 1):
            cols = row_cols.get(rr)
            if cols is None:
                continue
            if half is not None:
                lo_col = int(math.floor((c * cell - half) / cell)) - 1
                hi_col = int(math.floor(((c + 1) * cell + half) / cell)) + 1
                if hi_col - lo_col + 1 < ncol:
                    wanted = np.arange(lo_col, hi_col + 1) % ncol
                    cols = cols[np.isin(cols, wanted)]
            cands.extend(buckets[rr * ncol + int(cc)] for cc in cols)
        if not cands:
            continue
        cand = np.concatenate(cands)
        block = src_sorted[a:b]
        d = haversine_km(lat[block][:, None], lon[block][:, None],
                         lat[cand][None, :], lon[cand][None, :], earth.radius_km)
        i, j = np.nonzero(d <= max_km)
        out_s.append(block[i])
        out_t.append(cand[j])
        out_d.append(d[i, j])
    if not out_s:
        return empty
    return np.concatenate(out_s), np.concatenate(out_t), np.concatenate(out_d)


def _all_pairs(lat, lon, src, tgt, earth, keep):
    out_s, out_t, out_d = [], [], []
    step = max(1, _BLOCK // max(len(tgt), 1))
    for a in range(0, len(src), step):
        block = src[a:a + step]
        d = haversine_km(lat[block][:, None], lon[block][:, None],
                         lat[tgt][None, :], lon[tgt][None, :], earth.radius_km)
        i, j = np.nonzero(keep(d))
        out_s.append(block[i])
        out_t.append(tgt[j])
        out_d.append(d[i, j])
    return np.concatenate(out_s), np.concatenate(out_t), np.concatenate(out_d)


def _class_positions(catalog: ClassifiedCatalog, label: str, scope, min_cas) -> np.ndarray:
    pos = catalog.members(label)
    if scope is not None:
        pos = np.intersect1d(pos, scope)
    if min_cas is not None:
        # unknown casualties (-1) never pass a casualty threshold
        pos = pos[catalog.casualties[pos] >= min_cas]
    return pos


def enumerate_pairs(catalog: ClassifiedCatalog, windows: WindowSpec, filt: PairFilter,
                    scope: Optional[Iterable[str]] = None, earth: EarthModel = EARTH,
                    threads: int = 1) -> PairTable:
    """Latent-time pairs of ``catalog`` under ``filt``, window by window.

    Args:
        scope: optional event ids (e.g. one geographic cluster) that both
            members of a pair must belong to.

    Raises:
        KeyError: unknown class label.
        ValueError: the windows do not cover any day.
    """
    for label in (filt.source_class, filt.target_class):
        if label not in catalog.class_index:
            raise KeyError(f"unknown class {label!r}")
    end = catalog.era[1] if catalog.era else windows.start_date
    bounds = windows.bounds(end)
    scope_pos = catalog.positions(scope) if scope is not None else None
    src_all = _class_positions(catalog, filt.source_class, scope_pos, filt.min_casualties_source)
    tgt_all = _class_positions(catalog, filt.target_class, scope_pos, filt.min_casualties_target)
    days, cas = catalog.days, catalog.casualties

    def one_window(w):
        lo, hi = bounds[w]
        s = src_all[(days[src_all] >= lo) & (days[src_all] < hi)]
        t = tgt_all[(days[tgt_all] >= lo) & (days[tgt_all] < hi)]
        if filt.max_km is not None:
            ps, pt, pd = close_pairs(catalog.lat, catalog.lon, s, t, filt.max_km, earth)
        elif len(s) and len(t):
            ps, pt, pd = _all_pairs(catalog.lat, catalog.lon, s, t, earth,
                                    lambda d: d > filt.min_km)
        else:
            ps = pt = np.empty(0, np.int64)
            pd = np.empty(0)
        lag = days[pt] - days[ps]
        keep = (lag >= 1) & (ps != pt)
        if filt.incremental:
            keep &= (cas[ps] >= 0) & (cas[pt] > cas[ps])
        return ps[keep], pt[keep], lag[keep], pd[keep], np.full(int(keep.sum()), w)

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(one_window, range(len(bounds))))
    else:
        parts = [one_window(w) for w in range(len(bounds))]
    s, t, lag, d, win = (np.concatenate(col) for col in zip(*parts))

    rank = np.empty(len(catalog), dtype=np.int64)
    rank[np.argsort(catalog.ids.astype(str), kind="stable")] = np.arange(len(catalog))
    order = np.lexsort((rank[t], rank[s], days[t], days[s], win))
    return PairTable(catalog, s[order], t[order], lag[order], d[order], win[order])


def provoked_subset(catalog: ClassifiedCatalog, provoker_class: str, responder_class: str,
                    response_max_km: float = 20.0, response_max_weeks: int = 4,
                    earth: EarthModel = EARTH) -> set[str]:
    """Ids of responder events that follow some provoker event closely.

    A responder event qualifies when a provoker event lies within
    ``response_max_km`` and 1 to ``7 * response_max_weeks`` days before it.
    """
    b = catalog.members(provoker_class)
    a = catalog.members(responder_class)
    ps, pt, _ = close_pairs(catalog.lat, catalog.lon, b, a, response_max_km, earth)
    lag = catalog.days[pt] - catalog.days[ps]
    ok = (lag >= 1) & (lag <= 7 * response_max_weeks) & (ps != pt)
    return {str(catalog.ids[i]) for i in np.unique(pt[ok])}


def pair_sufficiency(pairs, min_count: int = DEFAULT_MIN_PAIRS) -> bool:
    """True when there are at least ``min_count`` pairs."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    return len(pairs) >= min_count
