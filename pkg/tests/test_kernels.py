import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from helpers import brute_concordance, brute_cox_loss
from survanchor import kernels

IMPLS = kernels.implementations()


def brute_kendall_s(x, y):
    s = 0
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            s += int(np.sign(x[i] - x[j]) * np.sign(y[i] - y[j]))
    return s


def random_case(rng, n, tie_levels=None):
    scores = rng.standard_normal(n)
    if tie_levels:
        time = rng.integers(1, tie_levels + 1, n).astype(float)
    else:
        time = rng.exponential(size=n)
    event = rng.integers(0, 2, n)
    return scores, time, event


def test_compiled_backend_is_available():
    # the build in this repository compiles the extension; the fallback must always exist
    assert "numpy" in IMPLS
    assert kernels.BACKEND in IMPLS


@pytest.mark.parametrize("name", sorted(IMPLS))
@pytest.mark.parametrize("seed", range(20))
def test_cox_loss_matches_brute_force(name, seed):
    rng = np.random.default_rng(seed)
    s, t, e = random_case(rng, int(rng.integers(2, 12)), tie_levels=4 if seed % 2 else None)
    if not e.any():
        e[0] = 1
    loss, _ = kernels.cox_loss_grad(s, t, e, impl=IMPLS[name])
    assert loss == pytest.approx(brute_cox_loss(s, t, e), rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("name", sorted(IMPLS))
@pytest.mark.parametrize("seed", range(20))
def test_concordance_counts_match_brute_force(name, seed):
    rng = np.random.default_rng(100 + seed)
    s, t, e = random_case(rng, int(rng.integers(2, 15)), tie_levels=3)
    s = np.round(s, 1)  # force some score ties
    assert kernels.concordance_counts(s, t, e, impl=IMPLS[name]) == brute_concordance(s, t, e)


@pytest.mark.parametrize("name", sorted(IMPLS))
@pytest.mark.parametrize("seed", range(20))
def test_kendall_s_matches_brute_force(name, seed):
    rng = np.random.default_rng(200 + seed)
    n = int(rng.integers(2, 20))
    x = rng.integers(0, 4, n).astype(float)
    y = rng.integers(0, 5, n).astype(float)
    assert kernels.kendall_s(x, y, impl=IMPLS[name]) == brute_kendall_s(x, y)


finite = st.floats(-30, 30, allow_nan=False)


@settings(max_examples=150, deadline=None)
@given(data=st.data(), n=st.integers(1, 40))
def test_backends_agree(data, n):
    s = data.draw(arrays(np.float64, n, elements=finite))
    t = data.draw(arrays(np.float64, n, elements=st.sampled_from([0.0, 1.0, 2.0, 2.5, 7.0])))
    e = data.draw(arrays(np.int64, n, elements=st.integers(0, 1)))
    results = {k: kernels.cox_loss_grad(s, t, e, impl=m) for k, m in IMPLS.items()}
    ref_loss, ref_grad = results["numpy"]
    for loss, grad in results.values():
        assert loss == pytest.approx(ref_loss, rel=1e-10, abs=1e-10)
        np.testing.assert_allclose(grad, ref_grad, rtol=1e-10, atol=1e-12)
    counts = {kernels.concordance_counts(s, t, e, impl=m) for m in IMPLS.values()}
    assert len(counts) == 1
    ks = {kernels.kendall_s(s, t, impl=m) for m in IMPLS.values()}
    assert len(ks) == 1


@settings(max_examples=100, deadline=None)
@given(data=st.data(), n=st.integers(1, 30))
def test_cox_gradient_sums_to_zero(data, n):
    # shifting every score by a constant leaves the loss unchanged
    s = data.draw(arrays(np.float64, n, elements=finite))
    t = data.draw(arrays(np.float64, n, elements=st.floats(0, 10)))
    e = data.draw(arrays(np.int64, n, elements=st.integers(0, 1)))
    _, g = kernels.cox_loss_grad(s, t, e)
    assert abs(g.sum()) <= 1e-9 * max(1, int(e.sum()))
