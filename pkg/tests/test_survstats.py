import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from helpers import brute_concordance
from survanchor.data import SyntheticSpec, generate_synthetic
from survanchor.errors import EmptyGroup, GridMismatch, NoComparablePairs, NoEvents
from survanchor.special import chi2_sf
from survanchor.survstats import (BeyondMaxTime, BreslowBaseline, SurvivalCurve, concordance_index,
                                  fit_breslow, logrank_test, median_from_curve, median_sort_key,
                                  median_to_json, predict_survival, predict_survival_matrix)


def breslow_oracle(f, y, d):
    """Term-by-term: at each distinct event time, events / sum of exp(f) over the risk set."""
    out = {}
    for t in sorted({y[i] for i in range(len(y)) if d[i]}):
        events = sum(1 for i in range(len(y)) if d[i] and y[i] == t)
        denom = sum(math.exp(f[j]) for j in range(len(y)) if y[j] >= t)
        out[t] = events / denom
    return out


def logrank_oracle(ta, ea, tb, eb):
    """Risk-table walk: O - E for group a and the hypergeometric variance."""
    times = sorted({t for t, e in zip(ta, ea) if e} | {t for t, e in zip(tb, eb) if e})
    o_e = v = 0.0
    for t in times:
        na = sum(1 for x in ta if x >= t)
        nb = sum(1 for x in tb if x >= t)
        da = sum(1 for x, e in zip(ta, ea) if e and x == t)
        db = sum(1 for x, e in zip(tb, eb) if e and x == t)
        n, d = na + nb, da + db
        o_e += da - d * na / n
        if n > 1:
            v += d * (na / n) * (nb / n) * (n - d) / (n - 1)
    stat = o_e ** 2 / v if v > 0 else 0.0
    return stat, (chi2_sf(stat, 1) if v > 0 else 1.0)


# --- Breslow -------------------------------------------------------------------

def test_breslow_single_event():
    base = fit_breslow(np.zeros(4), [5, 6, 7, 8], [1, 0, 0, 0])
    assert base.event_times.tolist() == [5.0]
    assert base.hazard_increments[0] == 0.25


def test_breslow_tied_events():
    base = fit_breslow(np.zeros(5), [3, 3, 4, 5, 6], [1, 1, 0, 0, 0])
    assert base.event_times.tolist() == [3.0]
    assert base.hazard_increments[0] == pytest.approx(2 / 5, abs=1e-15)
    assert base.event_counts.tolist() == [2]


@pytest.mark.parametrize("seed", range(25))
def test_breslow_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 10))
    f = rng.normal(size=n)
    y = rng.integers(1, 6, n).astype(float)
    d = rng.integers(0, 2, n)
    d[0] = 1
    base = fit_breslow(f, y, d)
    ref = breslow_oracle(f, y, d)
    assert base.event_times.tolist() == list(ref)
    np.testing.assert_allclose(base.hazard_increments, list(ref.values()), rtol=1e-12)


@settings(max_examples=100, deadline=None)
@given(data=st.data(), n=st.integers(1, 40))
def test_breslow_zero_scores_exact(data, n):
    y = data.draw(arrays(np.float64, n, elements=st.sampled_from([1.0, 2.0, 3.0, 4.0])))
    d = data.draw(arrays(np.int64, n, elements=st.integers(0, 1)))
    if not d.any():
        return
    base = fit_breslow(np.zeros(n), y, d)
    for t, h in zip(base.event_times, base.hazard_increments):
        assert h == np.sum(d[y == t]) / np.sum(y >= t)


def test_breslow_needs_events():
    with pytest.raises(NoEvents):
        fit_breslow([0, 0], [1, 2], [0, 0])


def test_baseline_roundtrip():
    base = fit_breslow([0.1, -0.2, 0.3], [1, 2, 3], [1, 1, 0])
    again = BreslowBaseline.from_dict(base.to_dict())
    np.testing.assert_array_equal(again.hazard_increments, base.hazard_increments)
    np.testing.assert_array_equal(again.cumulative_hazard([0.5, 1, 2.5, 9]), base.cumulative_hazard([0.5, 1, 2.5, 9]))


# --- predicted survival -----------------------------------------------------------

def test_very_low_risk_survives():
    base = fit_breslow([0, 0, 0], [1, 2, 3], [1, 1, 1])
    assert np.all(np.abs(predict_survival(base, -50).values - 1) < 1e-10)


def test_single_increment_half():
    base = BreslowBaseline(np.array([1.0]), np.array([0.6931]), np.array([1]))
    assert predict_survival(base, 0.0).at(1.0)[()] == pytest.approx(math.exp(-0.6931))
    assert predict_survival(base, 0.0).at(1.0)[()] == pytest.approx(0.5, abs=1e-4)
    assert predict_survival(base, 0.0).at(0.5)[()] == 1.0


def test_higher_risk_lower_curve():
    base = fit_breslow([0.3, -1, 2, 0], [1, 2, 3, 4], [1, 0, 1, 1])
    lo, hi = predict_survival(base, -0.5).values, predict_survival(base, 0.7).values
    assert np.all(hi <= lo)


@settings(max_examples=1000, deadline=None)
@given(inc=arrays(np.float64, st.integers(1, 20), elements=st.floats(0, 5)),
       score=st.floats(-20, 20))
def test_survival_in_unit_interval_and_nonincreasing(inc, score):
    base = BreslowBaseline(np.arange(1.0, inc.size + 1), inc, np.ones(inc.size, int))
    v = predict_survival(base, score).values
    assert np.all((v >= 0) & (v <= 1))
    assert np.all(np.diff(v) <= 0)


def test_survival_matrix_matches_rows():
    base = fit_breslow([0.1, 0.5, -0.3, 0.0], [1, 2, 3, 4], [1, 1, 0, 1])
    scores = np.array([-1.0, 0.0, 2.0])
    M = predict_survival_matrix(base, scores)
    for i, s in enumerate(scores):
        np.testing.assert_allclose(M[i], predict_survival(base, s).values, rtol=1e-15)


def test_curve_grid_mismatch():
    with pytest.raises(GridMismatch):
        SurvivalCurve([1, 2], [1.0])


# --- concordance -----------------------------------------------------------------

def test_concordance_perfect_and_ties():
    t = np.arange(1.0, 9.0)
    assert concordance_index(-t, t, np.ones(8)) == 1.0
    assert concordance_index(np.zeros(8), t, np.ones(8)) == 0.5


def test_no_comparable_pairs():
    with pytest.raises(NoComparablePairs):
        concordance_index([1, 2], [1, 2], [0, 0])


@pytest.mark.parametrize("seed", range(25))
def test_concordance_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = 5 if seed < 5 else int(rng.integers(3, 12))
    r = np.round(rng.normal(size=n), 1)
    y = rng.integers(1, 5, n).astype(float)
    d = rng.integers(0, 2, n)
    d[0], y[0] = 1, 0.5
    c, tied, comp = brute_concordance(r, y, d)
    assert concordance_index(r, y, d) == pytest.approx((c + 0.5 * tied) / comp, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(data=st.data(), n=st.integers(2, 40))
def test_concordance_of_negation(data, n):
    r = data.draw(arrays(np.float64, n, elements=st.floats(-100, 100), unique=True))
    y = data.draw(arrays(np.float64, n, elements=st.floats(0, 10)))
    d = data.draw(arrays(np.int64, n, elements=st.integers(0, 1)))
    try:
        c = concordance_index(r, y, d)
    except NoComparablePairs:
        return
    assert c + concordance_index(-r, y, d) == pytest.approx(1.0, abs=1e-12)


# --- log-rank ----------------------------------------------------------------------

def test_logrank_identical_groups():
    t, e = [1, 2, 3, 4, 5], [1, 0, 1, 1, 0]
    res = logrank_test(t, e, t, e)
    assert res.statistic == 0.0 and res.p_value == 1.0


def test_logrank_textbook_toy():
    # t=1: n=(2,2), d=1 from a -> E_a=1/2, V=1/4; t=2: n=(1,2), d=1 from a -> E_a=1/3, V=2/9
    # O_a - E_a = 2 - 5/6 = 7/6, V = 17/36
    res = logrank_test([1, 2], [1, 1], [3, 4], [1, 1])
    assert res.statistic == pytest.approx((7 / 6) ** 2 / (17 / 36), rel=1e-12)
    assert res.p_value == pytest.approx(chi2_sf(49 / 17, 1), rel=1e-12)


@pytest.mark.parametrize("seed", range(25))
def test_logrank_matches_risk_table(seed):
    rng = np.random.default_rng(seed)
    na, nb = rng.integers(1, 8, 2)
    ta, tb = rng.integers(1, 6, na).astype(float), rng.integers(1, 6, nb).astype(float)
    ea, eb = rng.integers(0, 2, na), rng.integers(0, 2, nb)
    ea[0] = 1
    stat, p = logrank_oracle(ta, ea, tb, eb)
    res = logrank_test(ta, ea, tb, eb)
    assert res.statistic == pytest.approx(stat, rel=1e-10, abs=1e-12)
    assert res.p_value == pytest.approx(p, rel=1e-10, abs=1e-12)


def test_logrank_separated_classes():
    ds, labels = generate_synthetic(SyntheticSpec(means=(2.0, 8.0), n_samples=400, seed=0))
    a, b = labels == 0, labels == 1
    assert logrank_test(ds.time[a], ds.event[a], ds.time[b], ds.event[b]).p_value < 1e-10


def test_logrank_errors():
    with pytest.raises(EmptyGroup):
        logrank_test([], [], [1], [1])
    with pytest.raises(NoEvents):
        logrank_test([1], [0], [2], [0])


@settings(max_examples=200, deadline=None)
@given(data=st.data(), na=st.integers(1, 20), nb=st.integers(1, 20))
def test_logrank_symmetric(data, na, nb):
    times = st.sampled_from([1.0, 2.0, 3.0, 5.0, 8.0])
    ta = data.draw(arrays(np.float64, na, elements=times))
    tb = data.draw(arrays(np.float64, nb, elements=times))
    ea = data.draw(arrays(np.int64, na, elements=st.integers(0, 1)))
    eb = data.draw(arrays(np.int64, nb, elements=st.integers(0, 1)))
    if not (ea.any() or eb.any()):
        return
    assert logrank_test(ta, ea, tb, eb) == logrank_test(tb, eb, ta, ea)


def test_logrank_null_calibration():
    rng = np.random.default_rng(2024)
    hits = 0
    for _ in range(500):
        t = rng.exponential(size=80)
        c = rng.exponential(2.0, size=80)
        y, e = np.minimum(t, c), (t <= c).astype(int)
        hits += logrank_test(y[:40], e[:40], y[40:], e[40:]).p_value < 0.05
    assert 0.02 <= hits / 500 <= 0.09


# --- medians -----------------------------------------------------------------------

def test_median_exact_crossing():
    grid = np.arange(1.0, 101.0)
    values = np.where(grid < 46, 0.9, 0.5)
    assert median_from_curve(SurvivalCurve(grid, values)) == 46.0


def test_median_never_crosses():
    assert median_from_curve(SurvivalCurve([1, 2, 3], [1.0, 1.0, 1.0])) is BeyondMaxTime


def test_median_first_at_or_below_half():
    assert median_from_curve(SurvivalCurve([1, 2, 3], [0.9, 0.5, 0.2])) == 2.0


def test_beyond_max_time_sorts_last():
    meds = [BeyondMaxTime, 3.0, 1e300, 0.0]
    assert sorted(meds, key=median_sort_key)[-1] is BeyondMaxTime
    assert median_to_json(BeyondMaxTime) == "beyond_max_time"
    import pickle
    assert pickle.loads(pickle.dumps(BeyondMaxTime)) is BeyondMaxTime
