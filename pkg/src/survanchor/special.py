"""Tail probabilities and Bessel functions used by the statistical tests.

Everything here is scalar, pure Python + numpy, and validated against
high-precision reference values in ``tests/fixtures/special_reference.json``.
"""
from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import Polynomial

__all__ = [
    "gammainc_lower",
    "gammainc_upper",
    "chi2_sf",
    "norm_sf",
    "log_bessel_iv",
    "bessel_ratio",
]

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _log_prefactor(a: float, x: float) -> float:
    return -x + a * math.log(x) - math.lgamma(a)


def _series_lower(a: float, x: float) -> float:
    # P(a, x) by the power series; converges fast for x < a + 1
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(_log_prefactor(a, x))


def _cf_upper(a: float, x: float) -> float:
    # Q(a, x) by modified Lentz evaluation of the continued fraction
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(_log_prefactor(a, x)) * h


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if a <= 0:
        raise ValueError(f"shape must be positive, got {a}")
    if x <= 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return _series_lower(a, x)
    return 1.0 - _cf_upper(a, x)


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).

    Computed directly (not as ``1 - P``) in the tail so that very small
    probabilities keep full relative precision.
    """
    if a <= 0:
        raise ValueError(f"shape must be positive, got {a}")
    if x <= 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return 1.0 - _series_lower(a, x)
    return _cf_upper(a, x)


def chi2_sf(x: float, dof: float) -> float:
    """Upper tail probability of a chi-square distribution."""
    if dof <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {dof}")
    if not x > 0:
        return 1.0
    return min(1.0, max(0.0, gammainc_upper(0.5 * dof, 0.5 * x)))


def norm_sf(z: float) -> float:
    """Upper tail of the standard normal, P(Z > z)."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


# --- modified Bessel function of the first kind -------------------------

_DEBYE_TERMS = 10
_DEBYE_RADIUS = 50.0


def _debye_polynomials(n: int) -> list[Polynomial]:
    # u_{k+1}(t) = t^2 (1 - t^2) u_k'(t) / 2 + 1/8 * int_0^t (1 - 5 s^2) u_k(s) ds
    t = Polynomial([0.0, 1.0])
    u = [Polynomial([1.0])]
    for _ in range(n):
        prev = u[-1]
        first = 0.5 * t**2 * (1 - t**2) * prev.deriv()
        second = ((1 - 5 * t**2) * prev).integ(lbnd=0) / 8.0
        u.append(first + second)
    return u


_DEBYE = [p.coef for p in _debye_polynomials(_DEBYE_TERMS)]


def _log_iv_series(nu: float, x: float) -> float:
    half = 0.5 * x
    m_max = int(half + 10.0 * math.sqrt(half + 1.0) + 40)
    m = np.arange(m_max + 1, dtype=float)
    lg_m = np.array([math.lgamma(k + 1.0) for k in m])
    lg_mn = np.array([math.lgamma(k + nu + 1.0) for k in m])
    logs = (2.0 * m + nu) * math.log(half) - lg_m - lg_mn
    top = logs.max()
    return float(top + math.log(np.exp(logs - top).sum()))


def _log_iv_debye(nu: float, x: float) -> float:
    # uniform asymptotic expansion, written in terms of r = sqrt(nu^2 + x^2)
    # so that nu -> 0 reduces to the large-argument (Hankel) expansion
    r = math.hypot(nu, x)
    lead = r + nu * math.log(x / (nu + r)) - 0.5 * math.log(2.0 * math.pi * r)
    corr = 1.0
    for k in range(1, _DEBYE_TERMS + 1):
        coef = _DEBYE[k]
        term = 0.0
        # u_k(t) / nu^k with t = nu / r; only powers j >= k are nonzero
        for j in range(k, len(coef)):
            c = coef[j]
            if c == 0.0:
                continue
            scale = nu ** (j - k) if j > k else 1.0
            term += c * scale / r**j
        corr += term
    return lead + math.log(corr)


def log_bessel_iv(nu: float, x: float) -> float:
    """log I_nu(x) for nu >= 0, x >= 0.

    Series for small ``sqrt(nu^2 + x^2)``, uniform asymptotic expansion
    otherwise.
    """
    if nu < 0:
        raise ValueError(f"order must be nonnegative, got {nu}")
    if x < 0:
        raise ValueError(f"argument must be nonnegative, got {x}")
    if x == 0:
        return 0.0 if nu == 0 else -math.inf
    if math.hypot(nu, x) >= _DEBYE_RADIUS:
        return _log_iv_debye(nu, x)
    return _log_iv_series(nu, x)


def bessel_ratio(nu: float, x: float) -> float:
    """I_{nu+1}(x) / I_nu(x), the mean resultant length of a vMF with nu = d/2 - 1."""
    if x == 0:
        return 0.0
    return math.exp(log_bessel_iv(nu + 1.0, x) - log_bessel_iv(nu, x))
