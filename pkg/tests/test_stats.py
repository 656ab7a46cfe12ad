import datetime as dt
import math
import random
from fractions import Fraction

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st

from nearwave.catalog import classify, identity_rules
from nearwave.geo import GeoPoint
from nearwave.pairs import PairFilter, WindowSpec, enumerate_pairs
from nearwave.stats import (InsufficientDataError, betainc_reg, bin_edges, bin_panel, classify_r,
                            correlate_terms, entropy_terms, kld, kld_distance_scan, panel_record,
                            pearson_r, reaction_correlation, reh, t_two_sided_p, wave_regression,
                            write_panel)
from nearwave.synth import ExcitationSpec, PoissonSpec, Region, gen_excited, gen_poisson

S0 = dt.date(2014, 1, 1)


# --- REH --------------------------------------------------------------------

def test_reh_examples():
    d = reh(7)
    assert d.exact(1) == Fraction(2, 7)
    assert d.exact(6) == Fraction(1, 21)
    assert d.exact(7) == 0 and d.exact(0) == 0
    assert d.pmf(1) == pytest.approx(0.2857142857, abs=1e-10)
    with pytest.raises(ValueError):
        reh(1)


@pytest.mark.parametrize("w", [2, 3, 7, 308, 1000, 10_000])
def test_reh_sums_to_one(w):
    d = reh(w)
    assert sum(d.exact(t) for t in range(1, w + 1)) == 1
    p = d.probabilities
    assert math.fsum(p) == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(p) <= 0) and p[-1] == 0


def test_bin_one_mass():
    d = reh(308)
    oracle = sum(2 * (308 - t) / (308 * 307) for t in range(1, 15))
    assert d.mass(1, 14) == pytest.approx(oracle, rel=1e-13)
    assert oracle == pytest.approx(2 * (4312 - 105) / (308 * 307), rel=1e-13)
    assert d.mass(1, 14) == pytest.approx(0.0890, abs=5e-5)


# --- binning ----------------------------------------------------------------

def test_bin_edges_cover_and_truncate():
    e = bin_edges(308, 14)
    assert e[0].tolist() == [1, 14] and e[-1].tolist() == [295, 307] and len(e) == 22
    e = bin_edges(30, 7)
    assert e.tolist() == [[1, 7], [8, 14], [15, 21], [22, 28], [29, 29]]


@pytest.mark.parametrize("w,b", [(308, 14), (308, 28), (30, 7), (100, 3)])
def test_reh_bin_masses_sum_to_one(w, b):
    p = bin_panel([1], w, b, min_pairs=1).p_reh
    assert math.fsum(p) == pytest.approx(1.0, abs=1e-12)


def test_refined_bins_reaggregate():
    fine = bin_panel(np.arange(1, 308), 308, 7, min_pairs=1)
    coarse = bin_panel(np.arange(1, 308), 308, 14, min_pairs=1)
    pairs = lambda x: np.resize(x, 2 * len(coarse)).reshape(-1, 2).sum(axis=1)
    assert len(fine) == 2 * len(coarse)
    assert pairs(fine.p_reh) == pytest.approx(coarse.p_reh, abs=1e-15)
    assert pairs(fine.counts).tolist() == coarse.counts.tolist()


def test_all_in_first_bin():
    panel = bin_panel([1, 5, 14, 3], 308, 14, min_pairs=1)
    assert panel.p_hat.tolist() == [1.0] + [0.0] * 21


def test_bin_panel_errors():
    with pytest.raises(ValueError):
        bin_panel([0, 3], 308, 14)
    with pytest.raises(ValueError):
        bin_panel([308], 308, 14)
    empty = bin_panel([], 308, 14)
    assert empty.p_hat is None and not empty.sufficient
    with pytest.raises(InsufficientDataError):
        kld(empty, force=True)


# --- KLD --------------------------------------------------------------------

def test_kld_hand_example():
    assert entropy_terms([1, 0], [0.5, 0.5]).sum() == pytest.approx(math.log(2))
    assert entropy_terms([1, 0], [0.5, 0.5])[1] == 0.0


def test_kld_zero_when_proportional():
    # 28 pairs at lag t for each t in 1..7 of a w=8 window: counts proportional to 8 - t
    lags = np.repeat(np.arange(1, 8), 2 * (8 - np.arange(1, 8)))
    terms = kld(bin_panel(lags, 8, 1, min_pairs=1)).terms
    assert np.allclose(terms, 0.0, atol=1e-15)


def test_kld_refuses_insufficient():
    panel = bin_panel(np.arange(1, 51), 308, 14)
    with pytest.raises(InsufficientDataError):
        kld(panel)
    assert kld(panel, force=True).kld >= 0


@settings(max_examples=200)
@given(st.lists(st.integers(1, 307), min_size=1, max_size=400), st.sampled_from([7, 14, 28]))
def test_gibbs_and_reorder_invariance(lags, b):
    a = kld(bin_panel(lags, 308, b, min_pairs=1)).kld
    assert a >= -1e-15
    shuffled = list(lags)
    random.Random(0).shuffle(shuffled)
    assert kld(bin_panel(shuffled, 308, b, min_pairs=1)).kld == a


# --- correlation ------------------------------------------------------------

def test_classification_thresholds():
    assert classify_r(0.66) == ("strong", "correlation")
    assert classify_r(-0.7) == ("strong", "anti-correlation")
    assert classify_r(0.5) == ("intermediate", "correlation")
    assert classify_r(0.33) == ("weak", "correlation")
    assert classify_r(-0.3300001) == ("intermediate", "anti-correlation")
    assert classify_r(None)[0] == "weak"


def test_correlation_mirror_examples():
    rng = np.random.default_rng(0)
    lags = rng.integers(1, 80, 500)
    panel = bin_panel(lags, 308, 14)
    res = reaction_correlation(panel, panel)
    assert res.r == pytest.approx(1.0) and res.classification == "strong correlation"
    e = rng.normal(size=12)
    res = correlate_terms(e, -e)
    assert res.r == pytest.approx(-1.0) and res.classification == "strong anti-correlation"
    res = correlate_terms(np.ones(5), e[:5])
    assert res.degenerate and res.r is None and res.strength == "weak"
    with pytest.raises(ValueError):
        reaction_correlation(panel, bin_panel(lags, 308, 28))


def test_pearson_matches_numpy():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=30), rng.normal(size=30)
    assert pearson_r(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], rel=1e-12)


# --- Student t --------------------------------------------------------------

@settings(max_examples=300)
@given(st.floats(0.05, 200), st.floats(0.05, 200), st.floats(0, 1))
def test_betainc_matches_scipy(a, b, x):
    assert betainc_reg(a, b, x) == pytest.approx(float(scipy.special.betainc(a, b, x)),
                                                 rel=1e-9, abs=1e-14)


@pytest.mark.parametrize("t,dof", [(0.0, 5), (1.0, 1), (2.5, 8), (-3.1, 20), (10.0, 3)])
def test_t_p_value(t, dof):
    want = 2 * float(scipy.special.stdtr(dof, -abs(t)))
    assert t_two_sided_p(t, dof) == pytest.approx(want, rel=1e-9)


# --- wave regression ------------------------------------------------------------

def dated_points(years, km):
    return [(f"c{i}", S0 + dt.timedelta(days=round(y * 365.25)), d) for i, (y, d) in enumerate(zip(years, km))]


def test_wave_collinear():
    fit = wave_regression(dated_points([0, 1, 2, 3], [0, 2400, 4800, 7200]))
    assert fit.r == pytest.approx(1.0, abs=1e-6) and fit.p < 1e-6
    assert fit.slope_km_per_year == pytest.approx(2400, rel=1e-3)


def test_wave_recovers_speed():
    rng = np.random.default_rng(4)
    years = np.sort(rng.uniform(0, 3, 10))
    km = 2400 * years
    km = km + rng.normal(0, 0.1 * km.std(), 10)
    fit = wave_regression(dated_points(years, km))
    assert abs(fit.slope_km_per_year - 2400) / 2400 < 0.15 and fit.p < 0.01


def test_wave_shuffled_is_insignificant():
    rng = np.random.default_rng(7)
    ps = []
    for _ in range(20):
        years = rng.uniform(0, 3, 12)
        km = 2400 * years
        ps.append(wave_regression(dated_points(rng.permutation(years), km)).p)
    # under the null p is uniform: about 1 in 20 below 0.05
    assert np.median(ps) > 0.2 and sum(p < 0.01 for p in ps) <= 2


def test_wave_errors():
    with pytest.raises(ValueError):
        wave_regression(dated_points([0, 1], [0, 1]))
    with pytest.raises(ValueError):
        wave_regression(dated_points([1, 1, 1], [0, 1, 2]))


# --- scan -------------------------------------------------------------------

def identity_catalog(events):
    return classify(events, identity_rules(events), "A")


def test_scan_identical_windows_zero_std():
    spec = PoissonSpec(2.0, Region(GeoPoint(44, 33), 50.0), S0, S0 + dt.timedelta(days=400))
    cat = identity_catalog(gen_poisson(spec, 0))
    # span equals one window: every sample lands on the same window
    rows = kld_distance_scan(cat, "A", [30.0], S0, span_weeks=20, sample_periods=5,
                             windows_per_period=1, w_weeks=20)
    assert rows[0].n_values == 5 and rows[0].std_kld == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        kld_distance_scan(cat, "A", [30.0], S0, span_weeks=30, windows_per_period=4, w_weeks=20)


def test_scan_poisson_flat():
    spec = PoissonSpec(3.0, Region(GeoPoint(44, 33), 60.0), S0, S0 + dt.timedelta(days=800))
    cat = identity_catalog(gen_poisson(spec, 1))
    rows = kld_distance_scan(cat, "A", [10, 20, 50, 100], S0, span_weeks=100, sample_periods=3,
                             windows_per_period=4, w_weeks=20, seed=1, threads=2)
    means = [r.mean_kld for r in rows]
    assert max(means) < 0.01 and max(means) - min(means) < 0.005
    assert all(r.n_values == 12 for r in rows)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_scan_excited_decreasing(seed):
    spec = ExcitationSpec(["A"], [0.3], [[0.5]], tau=10, sigma=15, region=Region(GeoPoint(44, 33), 150.0),
                          start=S0, end=S0 + dt.timedelta(days=800))
    cat = identity_catalog(gen_excited(spec, seed))
    rows = kld_distance_scan(cat, "A", [10, 20, 50, 100, 200], S0 + dt.timedelta(days=70),
                             span_weeks=100, sample_periods=5, windows_per_period=4, w_weeks=20, seed=seed)
    means = [r.mean_kld for r in rows]
    assert all(a > b for a, b in zip(means, means[1:]))
    assert means[0] > 5 * means[-1]


def test_scan_threads_deterministic():
    spec = PoissonSpec(1.0, Region(GeoPoint(44, 33), 40.0), S0, S0 + dt.timedelta(days=500))
    cat = identity_catalog(gen_poisson(spec, 2))
    kw = dict(span_weeks=60, sample_periods=4, windows_per_period=2, w_weeks=20, seed=3)
    assert kld_distance_scan(cat, "A", [20, 40], S0, **kw) == \
        kld_distance_scan(cat, "A", [20, 40], S0, threads=4, **kw)


# --- convergence and output -------------------------------------------------

def test_first_bin_converges_like_inverse_sqrt():
    p1 = reh(308).mass(1, 14)
    errs = {}
    for n_target, rate in [(1_000, 0.5), (4_000, 1.0), (16_000, 2.0)]:
        devs = []
        for seed in range(6):
            spec = PoissonSpec(rate, Region(GeoPoint(44, 33), 40.0),
                               S0, S0 + dt.timedelta(days=307))
            cat = identity_catalog(gen_poisson(spec, seed))
            lags = rng_subsample(enumerate_pairs(cat, WindowSpec(S0, 44, 1), PairFilter("A", "A", max_km=30)),
                                 n_target, seed)
            devs.append(abs((lags <= 14).mean() - p1))
        errs[n_target] = float(np.sqrt(np.mean(np.square(devs))))
    ns = sorted(errs)
    for n in ns:
        assert errs[n] < 4 * math.sqrt(p1 * (1 - p1) / n)
    # quadrupling N roughly halves the error
    assert errs[ns[-1]] < errs[ns[0]]


def rng_subsample(pairs, n, seed):
    lags = pairs.latent_days
    assert len(lags) >= n, f"only {len(lags)} pairs"
    return np.random.default_rng(seed).choice(lags, n, replace=False)


def test_panel_record_roundtrip(tmp_path):
    panel = bin_panel(np.arange(1, 200), 308, 28)
    terms = kld(panel).terms
    rec = panel_record(panel, terms)
    assert rec["pair_count"] == 199 and rec["sufficient"]
    assert rec["bins"][0] == {"t_start_days": 1, "t_end_days": 28, "p_hat": pytest.approx(28 / 199),
                              "p_reh": pytest.approx(panel.p_reh[0]), "E_i": pytest.approx(terms[0])}
    assert rec["kld"] == pytest.approx(terms.sum())
    write_panel(rec, tmp_path / "p.json", tmp_path / "p.csv")
    rows = (tmp_path / "p.csv").read_text().splitlines()
    assert rows[0] == "t_start_days,t_end_days,p_hat,p_reh,E_i" and len(rows) == 1 + len(panel)
