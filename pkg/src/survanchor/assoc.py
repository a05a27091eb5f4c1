"""Association tests between projections and raw features; per-anchor feature ranking."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .data import FeatureSchema, discretize_column
from .errors import (AllTied, BadQ, DegenerateTable, LengthMismatch, LowExpectedCount,
                     SurvAnchorError, TooFewGroups)
from .special import chi2_sf, norm_sf

TESTS = ("chi2", "kendall", "kruskal")


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    counts: np.ndarray
    row_labels: list[str]
    col_labels: list[str]

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2:
            raise DegenerateTable("contingency table must be 2-D")
        if (c < 0).any():
            raise DegenerateTable("counts must be nonnegative")
        if len(self.row_labels) != c.shape[0] or len(self.col_labels) != c.shape[1]:
            raise DegenerateTable("label counts must match table shape")
        object.__setattr__(self, "counts", c.astype(np.int64))

    @classmethod
    def from_codes(cls, row_codes, col_codes, row_labels, col_labels) -> "ContingencyTable":
        r = np.asarray(row_codes, dtype=np.int64)
        c = np.asarray(col_codes, dtype=np.int64)
        if r.shape != c.shape:
            raise LengthMismatch("row and column codes must have equal length")
        counts = np.zeros((len(row_labels), len(col_labels)), dtype=np.int64)
        np.add.at(counts, (r, c), 1)
        return cls(counts, list(row_labels), list(col_labels))

    def pruned(self) -> "ContingencyTable":
        """Drop all-zero rows and columns."""
        rows = np.flatnonzero(self.counts.sum(axis=1) > 0)
        cols = np.flatnonzero(self.counts.sum(axis=0) > 0)
        return ContingencyTable(self.counts[np.ix_(rows, cols)],
                                [self.row_labels[i] for i in rows],
                                [self.col_labels[j] for j in cols])


class StatResult(NamedTuple):
    statistic: float
    dof: float
    p_value: float


def chi_squared_independence(table: ContingencyTable) -> StatResult:
    """Pearson's chi-squared test of independence, no continuity correction."""
    t = table.pruned()
    O = t.counts.astype(float)
    total = O.sum()
    if total <= 0 or O.shape[0] < 2 or O.shape[1] < 2:
        raise DegenerateTable(f"need a nonempty table of at least 2x2 after pruning, got {O.shape}")
    E = np.outer(O.sum(axis=1), O.sum(axis=0)) / total
    if (E < 5).any():
        warnings.warn("some expected counts are below 5", LowExpectedCount, stacklevel=2)
    stat = float(np.sum((O - E) ** 2 / E))
    dof = (O.shape[0] - 1) * (O.shape[1] - 1)
    return StatResult(stat, dof, chi2_sf(stat, dof))


def _tie_sizes(v: np.ndarray) -> np.ndarray:
    _, counts = np.unique(v, return_counts=True)
    return counts[counts > 1].astype(float)


class KendallResult(NamedTuple):
    tau: float
    p_value: float


def kendall_tau(x, y) -> KendallResult:
    """Kendall's tau-b; two-sided p from the normal approximation with tie-adjusted variance."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.size != y.size:
        raise LengthMismatch(f"lengths differ: {x.size} vs {y.size}")
    n = x.size
    if n < 3:
        raise LengthMismatch(f"need at least 3 pairs, got {n}")
    tx, ty = _tie_sizes(x), _tie_sizes(y)
    n0 = n * (n - 1) / 2.0
    n1 = float(np.sum(tx * (tx - 1) / 2.0))
    n2 = float(np.sum(ty * (ty - 1) / 2.0))
    if n0 == n1 or n0 == n2:
        raise AllTied("one of the variables is constant")
    s = kernels.kendall_s(x, y)
    tau = s / math.sqrt((n0 - n1) * (n0 - n2))

    var = (n * (n - 1) * (2 * n + 5)
           - np.sum(tx * (tx - 1) * (2 * tx + 5))
           - np.sum(ty * (ty - 1) * (2 * ty + 5))) / 18.0
    var += np.sum(tx * (tx - 1)) * np.sum(ty * (ty - 1)) / (2.0 * n * (n - 1))
    if n > 2:
        var += (np.sum(tx * (tx - 1) * (tx - 2)) * np.sum(ty * (ty - 1) * (ty - 2))
                / (9.0 * n * (n - 1) * (n - 2)))
    z = s / math.sqrt(var)
    return KendallResult(float(min(max(tau, -1.0), 1.0)), min(1.0, 2.0 * norm_sf(abs(z))))


def average_ranks(v) -> np.ndarray:
    """1-based ranks with ties sharing their mean rank."""
    v = np.asarray(v, dtype=float)
    order = np.argsort(v, kind="stable")
    sv = v[order]
    starts = np.flatnonzero(np.concatenate([[True], sv[1:] != sv[:-1]]))
    ends = np.concatenate([starts[1:], [sv.size]])
    mean_rank = 0.5 * (starts + ends + 1)
    ranks = np.empty(v.size)
    ranks[order] = np.repeat(mean_rank, ends - starts)
    return ranks


def kruskal_wallis(groups) -> StatResult:
    """Kruskal-Wallis H with tie correction; p from chi-square with k-1 dof."""
    groups = [np.asarray(g, dtype=float).reshape(-1) for g in groups]
    groups = [g for g in groups if g.size]
    if len(groups) < 2:
        raise TooFewGroups(f"need at least 2 nonempty groups, got {len(groups)}")
    sizes = np.array([g.size for g in groups], dtype=float)
    N = sizes.sum()
    if N < 3:
        raise TooFewGroups(f"need at least 3 observations, got {int(N)}")
    allv = np.concatenate(groups)
    ranks = average_ranks(allv)
    sums = np.add.reduceat(ranks, np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int))
    H = 12.0 / (N * (N + 1)) * np.sum(sums ** 2 / sizes) - 3.0 * (N + 1)
    t = _tie_sizes(allv)
    corr = 1.0 - np.sum(t ** 3 - t) / (N ** 3 - N)
    if corr <= 0:
        raise AllTied("all values are equal")
    H = max(float(H / corr), 0.0)
    dof = len(groups) - 1
    return StatResult(H, dof, chi2_sf(H, dof))


# --- ranking -------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureScore:
    feature: str
    test: str
    statistic: float
    dof: float
    p_value: float
    rank: int


@dataclass(eq=False)
class FeatureRanking:
    anchor: str
    test: str
    scores: list[FeatureScore]
    failures: dict[str, str] = field(default_factory=dict)
    low_expected: list[str] = field(default_factory=list)

    @property
    def features(self) -> list[str]:
        return [s.feature for s in self.scores]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "feature", "test", "statistic", "p"])
        for s in self.scores:
            w.writerow([s.rank, s.feature, s.test, repr(s.statistic), repr(s.p_value)])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"anchor": self.anchor, "test": self.test,
                "scores": [{"rank": s.rank, "feature": s.feature, "statistic": s.statistic,
                            "dof": s.dof, "p": s.p_value} for s in self.scores],
                "failures": dict(sorted(self.failures.items())),
                "low_expected_counts": sorted(self.low_expected)}


def _score_feature(values, spec, projections, bins, n_bins, test):
    """Returns (StatResult, low_expected_flag)."""
    if test == "chi2":
        disc = discretize_column(values, spec)
        table = ContingencyTable.from_codes(disc.labels, bins, disc.descriptors,
                                            [str(j) for j in range(n_bins)])
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", LowExpectedCount)
            res = chi_squared_independence(table)
        return res, any(issubclass(w.category, LowExpectedCount) for w in caught)
    if test == "kendall":
        if spec.kind == "categorical":
            raise ValueError("Kendall's tau needs ordered values; feature is categorical")
        tau, p = kendall_tau(values, projections)
        return StatResult(tau, 0.0, p), False
    if test == "kruskal":
        disc = discretize_column(values, spec)
        groups = [projections[disc.labels == g] for g in range(len(disc.descriptors))]
        return kruskal_wallis(groups), False
    raise ValueError(f"unknown test {test!r}; choose from {TESTS}")


def rank_features(features, schema: FeatureSchema, projections, bins=None, test: str = "chi2",
                  anchor: str = "") -> FeatureRanking:
    """Test each raw feature against the projections and sort by ascending p.

    ``bins`` gives each row's projection bin (a ProjectionBinning or an
    index array); it is needed for ``chi2``. Features whose test fails are
    listed in ``failures`` and left out of the ranking.
    """
    if test not in TESTS:
        raise ValueError(f"unknown test {test!r}; choose from {TESTS}")
    X = np.asarray(features, dtype=float)
    p = np.asarray(projections, dtype=float)
    if X.ndim != 2 or X.shape[0] != p.size or X.shape[1] != len(schema):
        raise LengthMismatch("features must be n x D and row-aligned with projections")
    if bins is not None:
        n_bins = getattr(bins, "m", None)
        bins = np.asarray(getattr(bins, "bin_of_row", bins), dtype=np.int64)
        n_bins = int(bins.max()) + 1 if n_bins is None else n_bins
    elif test == "chi2":
        raise ValueError("chi2 ranking needs projection bins")
    else:
        n_bins = 0

    results, failures, low = [], {}, []
    for j, spec in enumerate(schema):
        try:
            res, flagged = _score_feature(X[:, j], spec, p, bins, n_bins, test)
        except (SurvAnchorError, ValueError, ArithmeticError) as exc:
            failures[spec.name] = f"{type(exc).__name__}: {exc}"
            continue
        if flagged:
            low.append(spec.name)
        results.append((spec.name, res))
    results.sort(key=lambda item: (item[1].p_value, item[0]))
    scores = [FeatureScore(name, test, float(r.statistic), float(r.dof), float(r.p_value), i + 1)
              for i, (name, r) in enumerate(results)]
    return FeatureRanking(anchor, test, scores, failures, low)


class FdrResult(NamedTuple):
    threshold: float | None
    accepted: np.ndarray


def fdr_threshold(p_values, q: float) -> FdrResult:
    """Benjamini-Yekutieli step-up procedure (valid under arbitrary dependence).

    Returns the largest sorted p-value passing its step and the indices of
    all p-values at or below it; ``threshold`` is None when none pass.
    """
    if not 0 < q < 1:
        raise BadQ(f"q must lie in (0, 1), got {q}")
    p = np.asarray(p_values, dtype=float).reshape(-1)
    if ((p < 0) | (p > 1) | ~np.isfinite(p)).any():
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    if m == 0:
        return FdrResult(None, np.zeros(0, dtype=np.int64))
    harmonic = float(np.sum(1.0 / np.arange(1, m + 1)))
    sp = np.sort(p)
    passing = np.flatnonzero(sp <= np.arange(1, m + 1) * q / (m * harmonic))
    if passing.size == 0:
        return FdrResult(None, np.zeros(0, dtype=np.int64))
    thr = float(sp[passing[-1]])
    return FdrResult(thr, np.flatnonzero(p <= thr))
