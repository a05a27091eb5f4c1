"""Breslow baseline hazard, predicted survival curves, concordance, log-rank."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import EmptyGroup, GridMismatch, NoComparablePairs, NoEvents
from .special import chi2_sf


class _BeyondMaxTime:
    """Median sentinel: the curve never reaches 1/2 on its grid."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "BeyondMaxTime"

    def __reduce__(self):
        return (_BeyondMaxTime, ())


BeyondMaxTime = _BeyondMaxTime()


def median_sort_key(median):
    """Sort key placing BeyondMaxTime after every finite median."""
    return (1, 0.0) if median is BeyondMaxTime else (0, float(median))


def median_to_json(median):
    return "beyond_max_time" if median is BeyondMaxTime else float(median)


@dataclass(frozen=True, eq=False)
class BreslowBaseline:
    event_times: np.ndarray
    hazard_increments: np.ndarray
    event_counts: np.ndarray

    def cumulative_hazard(self, t) -> np.ndarray:
        """Sum of increments at event times <= t (step function)."""
        cum = np.concatenate([[0.0], np.cumsum(self.hazard_increments)])
        idx = np.searchsorted(self.event_times, np.asarray(t, dtype=float), side="right")
        return cum[idx]

    def to_dict(self) -> dict:
        return {
            "event_times": self.event_times.tolist(),
            "hazard_increments": self.hazard_increments.tolist(),
            "event_counts": self.event_counts.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "BreslowBaseline":
        return cls(np.asarray(d["event_times"], dtype=float),
                   np.asarray(d["hazard_increments"], dtype=float),
                   np.asarray(d["event_counts"], dtype=np.int64))


@dataclass(frozen=True, eq=False)
class SurvivalCurve:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.shape != v.shape:
            raise GridMismatch("grid and values must have equal length")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    def at(self, t) -> np.ndarray:
        """Right-continuous step evaluation; 1 before the first grid point."""
        idx = np.searchsorted(self.grid, np.asarray(t, dtype=float), side="right")
        return np.concatenate([[1.0], self.values])[idx]

    def to_json(self) -> dict:
        return {"grid": self.grid.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_json(cls, d) -> "SurvivalCurve":
        return cls(d["grid"], d["values"])

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def fit_breslow(risk_scores, time, event) -> BreslowBaseline:
    """Breslow increments d_l / sum_{y_j >= t_l} exp(f_j) at unique event times."""
    f = np.asarray(risk_scores, dtype=float)
    y = np.asarray(time, dtype=float)
    d = np.asarray(event).astype(bool)
    if not d.any():
        raise NoEvents("Breslow estimator needs at least one event")
    times, counts = np.unique(y[d], return_counts=True)

    shift = f.max()
    order = np.argsort(y, kind="stable")
    ys = y[order]
    tail = np.cumsum(np.exp(f[order] - shift)[::-1])[::-1]
    first = np.searchsorted(ys, times, side="left")
    denom = tail[first]
    increments = counts * np.exp(-shift) / denom
    return BreslowBaseline(times, increments, counts.astype(np.int64))


def predict_survival(base: BreslowBaseline, risk_score: float, grid=None) -> SurvivalCurve:
    """S(t|x) = exp(-exp(f(x)) * H0(t)), on the baseline's event-time grid by default."""
    g = base.event_times if grid is None else np.asarray(grid, dtype=float)
    values = np.exp(-np.exp(float(risk_score)) * base.cumulative_hazard(g))
    return SurvivalCurve(g, values)


def predict_survival_matrix(base: BreslowBaseline, risk_scores, grid=None) -> np.ndarray:
    """Rows of predicted survival, one per score, on a shared grid."""
    g = base.event_times if grid is None else np.asarray(grid, dtype=float)
    H = base.cumulative_hazard(g)
    return np.exp(-np.exp(np.asarray(risk_scores, dtype=float))[:, None] * H[None, :])


def concordance_index(risk_scores, time, event) -> float:
    """Harrell's C: pairs with y_i < y_j and event_i are comparable.

    A comparable pair is concordant when risk_i > risk_j; score ties count 1/2.
    """
    conc, tied, comparable = kernels.concordance_counts(risk_scores, time, event)
    if comparable == 0:
        raise NoComparablePairs("no comparable pairs")
    return (conc + 0.5 * tied) / comparable


def _count_equal(values, points):
    v = np.sort(values)
    return np.searchsorted(v, points, side="right") - np.searchsorted(v, points, side="left")


class LogRankResult(NamedTuple):
    statistic: float
    p_value: float


def logrank_test(time_a, event_a, time_b, event_b) -> LogRankResult:
    """Two-sample log-rank test, 1 degree of freedom, hypergeometric variance."""
    ta, tb = np.asarray(time_a, dtype=float), np.asarray(time_b, dtype=float)
    ea, eb = np.asarray(event_a).astype(bool), np.asarray(event_b).astype(bool)
    if ta.size == 0 or tb.size == 0:
        raise EmptyGroup("log-rank test needs two nonempty groups")
    if not (ea.any() or eb.any()):
        raise NoEvents("log-rank test needs at least one event")

    times = np.unique(np.concatenate([ta[ea], tb[eb]]))
    sa, sb = np.sort(ta), np.sort(tb)
    at_risk_a = sa.size - np.searchsorted(sa, times, side="left")
    at_risk_b = sb.size - np.searchsorted(sb, times, side="left")
    da = _count_equal(ta[ea], times)
    db = _count_equal(tb[eb], times)

    na, nb = at_risk_a.astype(float), at_risk_b.astype(float)
    n = na + nb
    d = (da + db).astype(float)
    # written so that swapping the groups negates o_minus_e exactly
    o_minus_e = float(np.sum((da * nb - db * na) / n))
    with np.errstate(invalid="ignore", divide="ignore"):
        var = np.where(n > 1, d * (na * nb) / (n * n) * (n - d) / (n - 1), 0.0)
    v = float(var.sum())
    if v <= 0:
        return LogRankResult(0.0, 1.0)
    stat = o_minus_e * o_minus_e / v
    return LogRankResult(stat, chi2_sf(stat, 1))


def median_from_curve(curve: SurvivalCurve):
    """First grid time where the curve is <= 1/2, else ``BeyondMaxTime``."""
    hit = np.flatnonzero(curve.values <= 0.5)
    if hit.size == 0:
        return BeyondMaxTime
    return float(curve.grid[hit[0]])
