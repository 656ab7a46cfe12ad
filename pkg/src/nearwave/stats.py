"""Random-event null, binned latent-time panels, KLD and correlation statistics."""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .catalog import ClassifiedCatalog
from .pairs import (DEFAULT_MIN_PAIRS, PairFilter, WindowSpec, enumerate_pairs,
                    pair_sufficiency)

NEAR_REPEAT_BIN_DAYS = 14
NEAR_REACTION_BIN_DAYS = 28
STRONG = 0.66
WEAK = 0.33


class InsufficientDataError(ValueError):
    """A panel has too few pairs to be analysed."""


# --- random-event hypothesis ------------------------------------------------

@dataclass(frozen=True)
class REHDistribution:
    w_days: int

    def __post_init__(self):
        if self.w_days < 2:
            raise ValueError("w_days must be >= 2")

    def pmf(self, t):
        """P(t) = 2 (w - t) / (w (w - 1)) for integer lags 1..w, 0 elsewhere."""
        w = self.w_days
        t = np.asarray(t, dtype=float)
        p = 2.0 * (w - t) / (w * (w - 1.0))
        return np.where((t >= 1) & (t <= w), p, 0.0)

    def exact(self, t: int) -> Fraction:
        w = self.w_days
        if not 1 <= t <= w:
            return Fraction(0)
        return Fraction(2 * (w - t), w * (w - 1))

    @property
    def probabilities(self) -> np.ndarray:
        """P(t) for t = 1..w."""
        return self.pmf(np.arange(1, self.w_days + 1))

    def mass(self, t_start: int, t_end: int) -> float:
        """Probability of a lag in ``[t_start, t_end]``, summed in closed form."""
        w = self.w_days
        a, b = max(t_start, 1), min(t_end, w)
        if b < a:
            return 0.0
        n = b - a + 1
        return 2.0 * (n * w - (a + b) * n / 2.0) / (w * (w - 1.0))


def reh(w_days: int) -> REHDistribution:
    return REHDistribution(int(w_days))


# --- panels -----------------------------------------------------------------

@dataclass
class PanelHistogram:
    w_days: int
    bin_days: int
    edges: np.ndarray  # (nbins, 2) inclusive day ranges
    counts: np.ndarray
    p_reh: np.ndarray
    min_pairs: int = DEFAULT_MIN_PAIRS

    @property
    def pair_count(self) -> int:
        return int(self.counts.sum())

    @property
    def sufficient(self) -> bool:
        return self.pair_count >= self.min_pairs

    @property
    def p_hat(self) -> Optional[np.ndarray]:
        n = self.pair_count
        return self.counts / n if n else None

    def __len__(self):
        return len(self.counts)


def bin_edges(w_days: int, bin_days: int) -> np.ndarray:
    """Bin i covers lags ``[(i-1) b + 1, i b]``; the last bin stops at ``w - 1``."""
    if bin_days < 1:
        raise ValueError("bin_days must be positive")
    starts = np.arange(1, w_days, bin_days)
    ends = np.minimum(starts + bin_days - 1, w_days - 1)
    return np.stack([starts, ends], axis=1)


def bin_panel(pairs, w_days: int, bin_days: int, min_pairs: int = DEFAULT_MIN_PAIRS) -> PanelHistogram:
    """Histogram of pair latent days against the REH mass of each bin.

    ``pairs`` is a :class:`~nearwave.pairs.PairTable` or an array of latent
    days.
    """
    lags = np.asarray(getattr(pairs, "latent_days", pairs), dtype=np.int64)
    if np.any((lags < 1) | (lags >= w_days)):
        raise ValueError(f"latent days must lie in [1, {w_days - 1}]")
    dist = reh(w_days)
    edges = bin_edges(w_days, bin_days)
    counts = np.bincount((lags - 1) // bin_days, minlength=len(edges))[: len(edges)]
    p = np.array([dist.mass(a, b) for a, b in edges])
    return PanelHistogram(w_days, bin_days, edges, counts.astype(np.int64), p, min_pairs)


@dataclass
class EntropySeries:
    terms: np.ndarray  # E_i per bin

    @property
    def kld(self) -> float:
        return float(self.terms.sum())


def entropy_terms(p_hat, p) -> np.ndarray:
    """``p_hat * ln(p_hat / p)`` with empty bins contributing 0."""
    p_hat = np.asarray(p_hat, dtype=float)
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p_hat)
    nz = p_hat > 0
    if np.any(p[nz] <= 0):
        raise ValueError("reference probability is zero where data is not")
    out[nz] = p_hat[nz] * np.log(p_hat[nz] / p[nz])
    return out


def kld(panel: PanelHistogram, force: bool = False) -> EntropySeries:
    """Per-bin entropy contributions and their sum (the KLD against the REH).

    Raises:
        InsufficientDataError: fewer than ``panel.min_pairs`` pairs, unless
            ``force`` (an empty panel is always refused).
    """
    if panel.pair_count == 0:
        raise InsufficientDataError("empty panel")
    if not panel.sufficient and not force:
        raise InsufficientDataError(
            f"{panel.pair_count} pairs < {panel.min_pairs}; pass force=True to override")
    return EntropySeries(entropy_terms(panel.p_hat, panel.p_reh))


# --- correlation ------------------------------------------------------------

@dataclass
class CorrelationResult:
    r: Optional[float]
    strength: str  # strong | intermediate | weak
    sign: str  # correlation | anti-correlation
    degenerate: bool = False

    @property
    def classification(self) -> str:
        return f"{self.strength} {self.sign}"


def classify_r(r: Optional[float]) -> tuple[str, str]:
    if r is None or not math.isfinite(r):
        return "weak", "correlation"
    a = abs(r)
    if a >= STRONG:
        strength = "strong"
    elif a > WEAK:
        strength = "intermediate"
    else:
        strength = "weak"
    return strength, "anti-correlation" if r < 0 else "correlation"


def pearson_r(x, y) -> Optional[float]:
    """Pearson coefficient, or None when either series is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or len(x) < 2:
        raise ValueError("series must have equal length >= 2")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = math.sqrt(dx @ dx), math.sqrt(dy @ dy)
    if sx == 0 or sy == 0:
        return None
    return float(np.clip((dx @ dy) / (sx * sy), -1.0, 1.0))


def correlate_terms(e_ab, e_ba) -> CorrelationResult:
    r = pearson_r(e_ab, e_ba)
    strength, sign = classify_r(r)
    return CorrelationResult(r, strength, sign, r is None)


def reaction_correlation(panel_ab: PanelHistogram, panel_ba: PanelHistogram,
                         force: bool = False) -> CorrelationResult:
    """Correlate the E_i series of two mirror panels (A->B against B->A)."""
    if (panel_ab.w_days, panel_ab.bin_days) != (panel_ba.w_days, panel_ba.bin_days):
        raise ValueError("panels use different windows or bins")
    return correlate_terms(kld(panel_ab, force).terms, kld(panel_ba, force).terms)


# --- Student t via the regularized incomplete beta ---------------------------

def _betacf(a: float, b: float, x: float, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c, d = 1.0, 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, dof: int) -> float:
    """Two-sided p-value of a Student t statistic."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if math.isinf(t):
        return 0.0
    return betainc_reg(dof / 2.0, 0.5, dof / (dof + t * t))


@dataclass
class WaveFit:
    slope_km_per_year: float
    intercept_km: float
    r: float
    p: float
    n: int


def wave_regression(points: Sequence[tuple]) -> WaveFit:
    """Least-squares spread speed of first-event dates against distance.

    Args:
        points: ``(label, first_date, distance_km)`` triples; dates are
            measured in years of 365.25 days from the earliest one.

    Raises:
        ValueError: fewer than 3 points, or all dates equal.
    """
    if len(points) < 3:
        raise ValueError("need at least 3 points")
    days = np.array([p[1].toordinal() for p in points], dtype=float)
    years = (days - days.min()) / 365.25
    dist = np.array([p[2] for p in points], dtype=float)
    xm, ym = years.mean(), dist.mean()
    sxx = float(((years - xm) ** 2).sum())
    if sxx == 0:
        raise ValueError("all first dates coincide")
    sxy = float(((years - xm) * (dist - ym)).sum())
    syy = float(((dist - ym) ** 2).sum())
    slope = sxy / sxx
    r = sxy / math.sqrt(sxx * syy) if syy > 0 else 0.0
    r = max(-1.0, min(1.0, r))
    n = len(points)
    if abs(r) >= 1.0:
        p = 0.0
    else:
        t = r * math.sqrt((n - 2) / (1.0 - r * r))
        p = t_two_sided_p(t, n - 2)
    return WaveFit(slope, ym - slope * xm, r, p, n)


# --- KLD against distance threshold -----------------------------------------

@dataclass
class ScanRow:
    distance_km: float
    mean_kld: float
    std_kld: float
    n_values: int


def kld_distance_scan(catalog: ClassifiedCatalog, label: str, distance_grid: Sequence[float],
                      start_date: dt.date, span_weeks: int, sample_periods: int = 10,
                      windows_per_period: int = 4, w_weeks: int = 44,
                      bin_days: int = NEAR_REPEAT_BIN_DAYS, seed: int = 0,
                      min_pairs: int = 1, threads: int = 1) -> list[ScanRow]:
    """Mean and sample standard deviation of near-repeat KLD per distance threshold.

    Each of ``sample_periods`` periods starts at a whole-week offset drawn
    uniformly from the feasible range after ``start_date`` and holds
    ``windows_per_period`` consecutive windows; every window gives one KLD
    value per threshold. Windows with fewer than ``min_pairs`` pairs are
    skipped.
    """
    if span_weeks < windows_per_period * w_weeks:
        raise ValueError(f"span of {span_weeks} weeks cannot hold "
                         f"{windows_per_period} windows of {w_weeks} weeks")
    grid = sorted(float(d) for d in distance_grid)
    if not grid:
        raise ValueError("empty distance grid")
    rng = np.random.default_rng(seed)
    offsets = rng.integers(0, span_weeks - windows_per_period * w_weeks + 1, size=sample_periods)
    w_days = 7 * w_weeks
    tasks = [(int(off), j) for off in offsets for j in range(windows_per_period)]

    def run(task):
        off, j = task
        start = start_date + dt.timedelta(weeks=off + j * w_weeks)
        spec = WindowSpec(start, w_weeks, window_count=1)
        pairs = enumerate_pairs(catalog, spec, PairFilter(label, label, max_km=grid[-1]))
        values = []
        for d in grid:
            lags = pairs.latent_days[pairs.distance_km <= d]
            if len(lags) < max(min_pairs, 1):
                values.append(None)
                continue
            values.append(kld(bin_panel(lags, w_days, bin_days, min_pairs), force=True).kld)
        return values

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    rows = []
    for i, d in enumerate(grid):
        vals = np.array([r[i] for r in results if r[i] is not None], dtype=float)
        mean = float(vals.mean()) if len(vals) else float("nan")
        std = float(vals.std(ddof=1)) if len(vals) > 1 else float("nan")
        rows.append(ScanRow(d, mean, std, len(vals)))
    return rows


# --- serialization ----------------------------------------------------------

def panel_record(panel: PanelHistogram, terms: Optional[np.ndarray] = None) -> dict:
    p_hat = panel.p_hat
    bins = []
    for i, (a, b) in enumerate(panel.edges):
        bins.append({
            "t_start_days": int(a),
            "t_end_days": int(b),
            "p_hat": None if p_hat is None else float(p_hat[i]),
            "p_reh": float(panel.p_reh[i]),
            "E_i": None if terms is None else float(terms[i]),
        })
    return {
        "bins": bins,
        "kld": None if terms is None else float(np.sum(terms)),
        "pair_count": panel.pair_count,
        "sufficient": panel.sufficient,
        "w_days": panel.w_days,
        "bin_days": panel.bin_days,
    }


def write_panel(record: dict, json_path, csv_path=None) -> None:
    Path(json_path).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if csv_path is None:
        return
    with Path(csv_path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_start_days", "t_end_days", "p_hat", "p_reh", "E_i"])
        for b in record["bins"]:
            w.writerow([b["t_start_days"], b["t_end_days"],
                        "" if b["p_hat"] is None else repr(b["p_hat"]),
                        repr(b["p_reh"]), "" if b["E_i"] is None else repr(b["E_i"])])
