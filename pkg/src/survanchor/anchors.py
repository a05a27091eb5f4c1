"""Anchor directions in embedding space, cosine projections, binning, and ranking."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (ConceptOverlapsVisualization, DegenerateEmbedding, DegenerateProjections,
                     EmptyBundle, EmptyCluster, EmptyConcept, EmptyTopSet, GridMismatch, ZeroAnchor)
from .survstats import BeyondMaxTime, SurvivalCurve, median_from_curve, median_sort_key, median_to_json

ZERO_ANCHOR_TOL = 1e-10
DEGENERATE_ROW_TOL = 1e-12


def _as_matrix(rows) -> np.ndarray:
    U = getattr(rows, "embeddings", rows)
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[None, :]
    return U


@dataclass(frozen=True, eq=False)
class AnchorDirection:
    """A direction in embedding space measured from the anchor data's center of mass.

    ``kind`` is "cluster" or "concept"; ``label`` names the cluster index
    (0-based) or the concept.
    """

    vector: np.ndarray
    center_of_mass: np.ndarray
    kind: str
    label: str

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float)
        c = np.asarray(self.center_of_mass, dtype=float)
        if v.shape != c.shape or v.ndim != 1:
            raise ValueError("anchor vector and center of mass must be 1-D of equal length")
        if np.linalg.norm(v) < ZERO_ANCHOR_TOL:
            raise ZeroAnchor(f"anchor {self.name} has norm below {ZERO_ANCHOR_TOL}")
        object.__setattr__(self, "vector", v)
        object.__setattr__(self, "center_of_mass", c)

    @property
    def name(self) -> str:
        if self.kind == "cluster":
            return f"cluster{int(self.label) + 1}"
        return f"concept:{self.label}"

    def to_json(self) -> dict:
        return {"name": self.name, "kind": self.kind, "label": self.label,
                "vector": self.vector.tolist(), "center_of_mass": self.center_of_mass.tolist()}

    @classmethod
    def from_json(cls, d) -> "AnchorDirection":
        return cls(d["vector"], d["center_of_mass"], d["kind"], d["label"])


def center_of_mass(anchor_rows) -> np.ndarray:
    U = _as_matrix(anchor_rows)
    if U.shape[0] == 0:
        raise EmptyBundle("center of mass of an empty set")
    return U.mean(axis=0)


def cluster_anchor(anchor_rows, assignments, j: int, center=None) -> AnchorDirection:
    """Mean of cluster ``j``'s embeddings minus the center of mass.

    ``assignments`` may be a MixtureFit or an array of 0-based cluster indices.
    """
    U = _as_matrix(anchor_rows)
    z = np.asarray(getattr(assignments, "assignments", assignments))
    if z.shape[0] != U.shape[0]:
        raise ValueError("assignments must be row-aligned with the anchor embeddings")
    members = z == j
    if not members.any():
        raise EmptyCluster(f"cluster {j} has no members")
    c = center_of_mass(U) if center is None else np.asarray(center, dtype=float)
    return AnchorDirection(U[members].mean(axis=0) - c, c, "cluster", str(j))


def concept_anchor(concept_rows, center, name: str, encoder=None,
                   concept_ids=None, visualization_ids=None) -> AnchorDirection:
    """Mean embedding of examples showing a concept, minus the center of mass.

    ``concept_rows`` are embeddings, or raw inputs when ``encoder`` is given.
    Overlap between concept and visualization ids only warns: disjoint rows
    do not guarantee independent collection.
    """
    rows = concept_rows if encoder is None else encoder(np.asarray(concept_rows, dtype=float))
    U = _as_matrix(rows)
    if U.shape[0] == 0:
        raise EmptyConcept(f"concept {name!r} has no examples")
    if concept_ids is None:
        concept_ids = getattr(concept_rows, "ids", None)
    if concept_ids is not None and visualization_ids is not None:
        shared = set(map(str, concept_ids)) & set(map(str, visualization_ids))
        if shared:
            warnings.warn(f"concept {name!r} shares {len(shared)} rows with the visualization data",
                          ConceptOverlapsVisualization, stacklevel=2)
    c = np.asarray(center, dtype=float)
    return AnchorDirection(U.mean(axis=0) - c, c, "concept", name)


def project(rows, anchor: AnchorDirection) -> np.ndarray:
    """Cosine similarity between each centered embedding and the anchor."""
    U = _as_matrix(rows) - anchor.center_of_mass
    norms = np.linalg.norm(U, axis=1)
    bad = np.flatnonzero(norms <= DEGENERATE_ROW_TOL)
    if bad.size:
        raise DegenerateEmbedding(int(bad[0]))
    mu = anchor.vector
    p = (U @ mu) / (norms * np.linalg.norm(mu))
    return np.clip(p, -1.0, 1.0)


@dataclass(frozen=True, eq=False)
class ProjectionBinning:
    """Equal-width bins over [min, max] of the projections; the last bin is closed."""

    edges: np.ndarray
    bin_of_row: np.ndarray

    @property
    def m(self) -> int:
        return self.edges.size - 1

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def members(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.bin_of_row == j) for j in range(self.m)]

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.bin_of_row, minlength=self.m)

    def intervals(self, digits: int = 2) -> list[str]:
        out = []
        for j in range(self.m):
            lo, hi = round(float(self.edges[j]), digits), round(float(self.edges[j + 1]), digits)
            close = "]" if j == self.m - 1 else ")"
            out.append(f"[{lo:g}, {hi:g}{close}")
        return out

    def to_json(self) -> dict:
        return {"edges": self.edges.tolist(), "midpoints": self.midpoints.tolist(),
                "intervals": self.intervals(), "counts": self.counts.tolist(),
                "members": [m.tolist() for m in self.members]}


def bin_projections(projections, m: int = 7) -> ProjectionBinning:
    p = np.asarray(projections, dtype=float)
    if m < 1:
        raise ValueError("need at least one bin")
    if p.size == 0:
        raise DegenerateProjections("no projections to bin")
    lo, hi = float(p.min()), float(p.max())
    if lo == hi:
        raise DegenerateProjections(f"all projections equal {lo}")
    edges = lo + (hi - lo) * np.arange(m + 1) / m
    edges[0], edges[-1] = lo, hi
    bins = np.searchsorted(edges[1:-1], p, side="right")
    return ProjectionBinning(edges, bins.astype(np.int64))


def _curve_matrix(curves, grid=None) -> tuple[np.ndarray, np.ndarray]:
    """Stack per-row curves into (grid, n x T matrix), checking the grid is shared."""
    if isinstance(curves, np.ndarray):
        if grid is None:
            raise GridMismatch("a curve matrix needs its grid")
        g = np.asarray(grid, dtype=float)
        if curves.ndim != 2 or curves.shape[1] != g.size:
            raise GridMismatch("curve matrix columns must match the grid")
        return g, curves
    curves = list(curves)
    if not curves:
        return np.asarray(grid if grid is not None else [], dtype=float), np.zeros((0, 0))
    g = curves[0].grid if grid is None else np.asarray(grid, dtype=float)
    for c in curves:
        if c.grid.shape != g.shape or not np.array_equal(c.grid, g):
            raise GridMismatch("survival curves must share a grid")
    return g, np.vstack([c.values for c in curves])


def bin_survival(binning: ProjectionBinning, curves, grid=None) -> list[SurvivalCurve | None]:
    """Average predicted survival per bin; empty bins give None."""
    g, S = _curve_matrix(curves, grid)
    if S.shape[0] != binning.bin_of_row.size:
        raise GridMismatch("one curve per projected row is required")
    out = []
    for idx in binning.members:
        out.append(SurvivalCurve(g, S[idx].mean(axis=0)) if idx.size else None)
    return out


@dataclass(frozen=True, eq=False)
class AnchorRank:
    anchor: AnchorDirection
    threshold: float
    top_rows: np.ndarray
    curve: SurvivalCurve
    median: object

    def to_json(self) -> dict:
        return {"anchor": self.anchor.name, "threshold": self.threshold,
                "n_top": int(self.top_rows.size), "median": median_to_json(self.median)}


def top_fraction_threshold(projections, alpha: float) -> float:
    """Sorted projection at 1-based position ceil((1 - alpha) n)."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    p = np.sort(np.asarray(projections, dtype=float))
    if p.size == 0:
        raise EmptyTopSet("no projections")
    pos = max(1, math.ceil((1.0 - alpha) * p.size - 1e-9))
    return float(p[pos - 1])


def rank_anchors(anchors, projections, curves, alpha: float = 0.1, grid=None) -> list[AnchorRank]:
    """Order anchors by the median of the mean survival curve over their top-alpha rows.

    Rows tied with the threshold are all included. Anchors whose curve never
    reaches 1/2 sort last.
    """
    g, S = _curve_matrix(curves, grid)
    ranked = []
    for anchor, p in zip(anchors, projections):
        p = np.asarray(p, dtype=float)
        if p.size != S.shape[0]:
            raise GridMismatch("projections and curves must be row-aligned")
        q = top_fraction_threshold(p, alpha)
        top = np.flatnonzero(p >= q)
        if top.size == 0:
            raise EmptyTopSet(f"no rows at or above {q} for {anchor.name}")
        curve = SurvivalCurve(g, S[top].mean(axis=0))
        ranked.append(AnchorRank(anchor, q, top, curve, median_from_curve(curve)))
    return sorted(ranked, key=lambda r: median_sort_key(r.median))


def clumping_diagnostic(projections, edge_tol: float = 0.01) -> float:
    """Fraction of projections within ``edge_tol`` of +-1."""
    p = np.asarray(projections, dtype=float)
    if p.size == 0:
        raise ValueError("no projections")
    return float(np.mean(np.abs(p) > 1.0 - edge_tol))


__all__ = [
    "AnchorDirection", "AnchorRank", "BeyondMaxTime", "ProjectionBinning", "bin_projections",
    "bin_survival", "center_of_mass", "clumping_diagnostic", "cluster_anchor", "concept_anchor",
    "project", "rank_anchors", "top_fraction_threshold",
]
