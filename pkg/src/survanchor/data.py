"""Survival datasets: ingestion, splitting, discretization and synthetic data."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    BadEventFlag,
    BadFractions,
    BadSpec,
    DegenerateFeature,
    MissingColumn,
    MissingValue,
    NegativeTime,
    UnparseableCell,
)

KINDS = ("continuous", "ordinal", "categorical", "indicator")
ROLES = ("train", "validation", "anchor", "visualization")
_MISSING = {"", "na", "nan", "null", "none", "?"}

# train 70% (of which 20% held out for validation), test 30% (25% anchor, 75% visualization)
DEFAULT_FRACTIONS = (0.56, 0.14, 0.075, 0.225)


@dataclass(frozen=True)
class FeatureSpec:
    """One column of the feature matrix.

    ``rule`` is ``"quartile"``, ``"identity"`` or a sequence of explicit cut
    points. Categorical features store their level labels; the feature
    matrix holds the integer code (index into ``levels``).
    """

    name: str
    kind: str = "continuous"
    levels: tuple[str, ...] = ()
    rule: str | tuple[float, ...] = "quartile"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BadSpec(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if isinstance(self.rule, str):
            if self.rule not in ("quartile", "identity"):
                raise BadSpec(f"feature {self.name!r}: unknown rule {self.rule!r}")
        else:
            cuts = tuple(float(c) for c in self.rule)
            if any(b < a for a, b in zip(cuts, cuts[1:])):
                raise BadSpec(f"feature {self.name!r}: cut points must be nondecreasing")
            object.__setattr__(self, "rule", cuts)
        object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))

    @classmethod
    def default(cls, name: str, kind: str = "continuous", levels=()) -> "FeatureSpec":
        rule = "quartile" if kind == "continuous" else "identity"
        return cls(name, kind, tuple(levels), rule)

    def to_dict(self) -> dict:
        rule = self.rule if isinstance(self.rule, str) else list(self.rule)
        return {"name": self.name, "kind": self.kind, "levels": list(self.levels), "rule": rule}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        rule = d.get("rule", "quartile" if d.get("kind", "continuous") == "continuous" else "identity")
        if not isinstance(rule, str):
            rule = tuple(rule)
        return cls(d["name"], d.get("kind", "continuous"), tuple(d.get("levels", ())), rule)


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[FeatureSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise BadSpec("feature names must be unique")

    def __len__(self):
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    def __getitem__(self, key) -> FeatureSpec:
        if isinstance(key, str):
            return self.features[self.index(key)]
        return self.features[key]

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def replace_feature(self, spec: FeatureSpec) -> "FeatureSchema":
        return FeatureSchema(tuple(spec if f.name == spec.name else f for f in self.features))

    def to_list(self) -> list[dict]:
        return [f.to_dict() for f in self.features]

    @classmethod
    def from_list(cls, items) -> "FeatureSchema":
        return cls(tuple(FeatureSpec.from_dict(d) for d in items))

    @classmethod
    def continuous(cls, names: Sequence[str]) -> "FeatureSchema":
        return cls(tuple(FeatureSpec.default(n) for n in names))


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Feature matrix with observed times and event indicators (1 = event)."""

    features: np.ndarray
    time: np.ndarray
    event: np.ndarray
    schema: FeatureSchema
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            raise BadSpec("features must be a 2-D array")
        n = X.shape[0]
        t = np.asarray(self.time, dtype=float).reshape(-1)
        e = np.asarray(self.event).astype(np.int64).reshape(-1)
        if t.size != n or e.size != n:
            raise BadSpec("time/event length must equal the number of rows")
        if X.shape[1] != len(self.schema):
            raise BadSpec(f"schema has {len(self.schema)} features, matrix has {X.shape[1]}")
        if np.isnan(X).any():
            raise BadSpec("features contain missing values")
        if (t < 0).any():
            raise NegativeTime(int(np.flatnonzero(t < 0)[0]), float(t[t < 0][0]))
        if not np.isin(e, (0, 1)).all():
            raise BadEventFlag(int(np.flatnonzero(~np.isin(e, (0, 1)))[0]))
        ids = np.arange(n).astype(str) if self.ids is None else np.asarray(self.ids).astype(str)
        if ids.size != n:
            raise BadSpec("ids length must equal the number of rows")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "time", t)
        object.__setattr__(self, "event", e)
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def D(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "SurvivalDataset":
        rows = np.asarray(rows)
        return SurvivalDataset(self.features[rows], self.time[rows], self.event[rows],
                               self.schema, self.ids[rows])

    def column(self, name: str) -> np.ndarray:
        return self.features[:, self.schema.index(name)]


# --- ingestion ----------------------------------------------------------------

def _parse_float(raw: str, row: int, col: str) -> float:
    if raw.strip().lower() in _MISSING:
        raise MissingValue(row, col, raw)
    try:
        value = float(raw)
    except ValueError:
        raise UnparseableCell(row, col, raw) from None
    if math.isnan(value):
        raise MissingValue(row, col, raw)
    return value


def load_csv(path, schema: FeatureSchema, time_col: str, event_col: str,
             id_col: str | None = None) -> SurvivalDataset:
    """Read a header-row CSV into a dataset.

    Categorical cells are strings; when a categorical feature declares no
    levels, the observed labels are sorted and recorded in the returned
    schema so codes are stable regardless of row order. Row numbers in
    errors are 0-based data rows (the header is not counted).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        needed = [time_col, event_col] + schema.names + ([id_col] if id_col else [])
        for col in needed:
            if col not in header:
                raise MissingColumn(col)
        rows = list(reader)

    n = len(rows)
    specs = list(schema)
    for j, spec in enumerate(specs):
        if spec.kind == "categorical" and not spec.levels:
            observed = set()
            for i, r in enumerate(rows):
                raw = r[spec.name].strip()
                if raw.lower() in _MISSING:
                    raise MissingValue(i, spec.name, raw)
                observed.add(raw)
            specs[j] = replace(spec, levels=tuple(sorted(observed)))
    schema = FeatureSchema(tuple(specs))

    X = np.empty((n, len(schema)))
    time = np.empty(n)
    event = np.empty(n, dtype=np.int64)
    for i, r in enumerate(rows):
        for j, spec in enumerate(schema):
            raw = r[spec.name].strip()
            if spec.kind == "categorical":
                if raw.lower() in _MISSING:
                    raise MissingValue(i, spec.name, raw)
                try:
                    X[i, j] = spec.levels.index(raw)
                except ValueError:
                    raise UnparseableCell(i, spec.name, raw) from None
            else:
                value = _parse_float(raw, i, spec.name)
                if spec.kind == "indicator" and value not in (0.0, 1.0):
                    raise UnparseableCell(i, spec.name, raw)
                X[i, j] = value
        t = _parse_float(r[time_col], i, time_col)
        if t < 0:
            raise NegativeTime(i, t)
        time[i] = t
        raw_e = r[event_col].strip()
        try:
            e = float(raw_e)
        except ValueError:
            raise BadEventFlag(i, raw_e) from None
        if e not in (0.0, 1.0):
            raise BadEventFlag(i, raw_e)
        event[i] = int(e)
    ids = [r[id_col] for r in rows] if id_col else None
    return SurvivalDataset(X, time, event, schema, ids)


def _format_cell(value: float, spec: FeatureSpec) -> str:
    if spec.kind == "categorical":
        return spec.levels[int(value)]
    if spec.kind in ("indicator", "ordinal") and float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def save_csv(ds: SurvivalDataset, path, time_col: str = "time", event_col: str = "event",
             id_col: str = "id", rows=None) -> None:
    rows = range(ds.n) if rows is None else rows
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([id_col] + ds.schema.names + [time_col, event_col])
        for i in rows:
            cells = [_format_cell(v, s) for v, s in zip(ds.features[i], ds.schema)]
            w.writerow([ds.ids[i]] + cells + [repr(float(ds.time[i])), int(ds.event[i])])


# --- splitting ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SplitPlan:
    roles: np.ndarray  # integer codes into ROLES, one per row
    seed: int
    fractions: tuple[float, ...]

    def indices(self, role: str) -> np.ndarray:
        return np.flatnonzero(self.roles == ROLES.index(role))

    def counts(self) -> dict[str, int]:
        return {r: int((self.roles == k).sum()) for k, r in enumerate(ROLES)}

    def role_names(self) -> list[str]:
        return [ROLES[k] for k in self.roles]

    def to_dict(self) -> dict:
        return {"seed": self.seed, "fractions": list(self.fractions), "counts": self.counts()}


def make_splits(ds, fractions: Sequence[float] = DEFAULT_FRACTIONS, seed: int = 0) -> SplitPlan:
    """Assign every row one role: seeded shuffle, then contiguous slices.

    ``ds`` may be a dataset or a row count. Stage sizes are rounded from the
    cumulative fractions, so each count is within one row of its target.
    """
    n = ds if isinstance(ds, (int, np.integer)) else ds.n
    fr = tuple(float(f) for f in fractions)
    if len(fr) != len(ROLES) or any(not f > 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
        raise BadFractions(f"need {len(ROLES)} positive fractions summing to 1, got {fr}")
    bounds = np.floor(np.cumsum(fr) * n + 0.5).astype(int)
    bounds[-1] = n
    perm = np.random.default_rng(seed).permutation(n)
    roles = np.empty(n, dtype=np.int64)
    start = 0
    for k, stop in enumerate(bounds):
        roles[perm[start:stop]] = k
        start = stop
    return SplitPlan(roles, int(seed), fr)


def write_manifest(path, ds: SurvivalDataset, plan: SplitPlan | None = None, **extra) -> dict:
    manifest = {
        "n": ds.n,
        "D": ds.D,
        "schema": ds.schema.to_list(),
        "split_counts": plan.counts() if plan is not None else None,
        "seed": plan.seed if plan is not None else None,
        "fractions": list(plan.fractions) if plan is not None else None,
        "censoring_rate": float(1.0 - ds.event.mean()) if ds.n else None,
    }
    manifest.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


# --- discretization ---------------------------------------------------------------

class Discretization(NamedTuple):
    labels: np.ndarray
    descriptors: list[str]


def _fmt(x: float) -> str:
    return f"{x:.4g}"


def _interval_labels(cuts: np.ndarray, lo: float, hi: float) -> list[str]:
    edges = [lo, *cuts, hi]
    out = [f"[{_fmt(edges[0])}, {_fmt(edges[1])}]"]
    for a, b in zip(edges[1:-1], edges[2:]):
        out.append(f"({_fmt(a)}, {_fmt(b)}]")
    return out


def discretize_feature(values, rule="quartile", levels: Sequence[str] = ()) -> Discretization:
    """Map each value to a bin index.

    Cut-point rules use right-closed bins, so a value equal to a cut point
    lands in the lower bin. ``"identity"`` keeps discrete values: bins are
    the declared ``levels`` (values are codes into them) or else the sorted
    distinct values.
    """
    v = np.asarray(values, dtype=float).reshape(-1)
    if isinstance(rule, str) and rule == "identity":
        if levels:
            codes = v.astype(np.int64)
            if (codes != v).any() or codes.min(initial=0) < 0 or codes.max(initial=0) >= len(levels):
                raise DegenerateFeature("identity codes out of range for declared levels")
            return Discretization(codes, [str(l) for l in levels])
        uniq = np.unique(v)
        labels = np.searchsorted(uniq, v)
        return Discretization(labels, [_fmt(u) for u in uniq])
    if v.size == 0:
        raise DegenerateFeature("no values to discretize")
    if isinstance(rule, str) and rule == "quartile":
        distinct = np.unique(v).size
        if distinct < 4:
            raise DegenerateFeature(f"quartile rule needs at least 4 distinct values, got {distinct}")
        cuts = np.percentile(v, [25.0, 50.0, 75.0])
    elif isinstance(rule, str):
        raise BadSpec(f"unknown discretization rule {rule!r}")
    else:
        cuts = np.asarray(rule, dtype=float)
        if (np.diff(cuts) < 0).any():
            raise BadSpec("cut points must be nondecreasing")
    labels = np.searchsorted(cuts, v, side="left")
    return Discretization(labels, _interval_labels(cuts, float(v.min()), float(v.max())))


def discretize_column(values, spec: FeatureSpec) -> Discretization:
    if spec.kind == "categorical":
        return discretize_feature(values, "identity", spec.levels)
    if spec.kind == "indicator":
        return discretize_feature(values, "identity", ("0", "1"))
    return discretize_feature(values, spec.rule)


# --- standardization ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Standardizer:
    """Zero-mean / unit-variance scaling of continuous columns."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, ds: SurvivalDataset, rows=None) -> "Standardizer":
        X = ds.features if rows is None else ds.features[rows]
        cont = np.array([f.kind == "continuous" for f in ds.schema])
        mean = np.where(cont, X.mean(axis=0), 0.0)
        std = X.std(axis=0)
        scale = np.where(cont & (std > 0), std, 1.0)
        return cls(mean, scale)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["scale"], dtype=float))


# --- synthetic data --------------------------------------------------------------------

# mean survival time per digit class used by Survival MNIST label generation
SURVIVAL_MNIST_MEANS = (11.25, 2.25, 5.25, 5.0, 4.75, 8.0, 2.0, 11.0, 1.75, 10.75)


@dataclass(frozen=True)
class SyntheticSpec:
    """Class-structured tabular data with Gamma survival times.

    Class ``j`` draws features from an isotropic Gaussian (std ``spread``)
    around a center at distance ``radius`` from the origin, and true event
    times from a Gamma with mean ``means[j]`` and variance ``variance``.
    """

    means: tuple[float, ...] = SURVIVAL_MNIST_MEANS
    variance: float = 1e-3
    censor_quantile: float = 0.90
    n_samples: int = 2000
    seed: int = 0
    dim: int = 10
    radius: float = 5.0
    spread: float = 1.0
    centers: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        if not self.means or any(not m > 0 for m in self.means):
            raise BadSpec("Gamma means must be positive")
        if not self.variance > 0:
            raise BadSpec("variance must be positive")
        if not 0 < self.censor_quantile <= 1:
            raise BadSpec("censoring quantile must lie in (0, 1]")
        if self.n_samples < 1 or self.dim < 1:
            raise BadSpec("n_samples and dim must be positive")
        if self.centers is not None:
            c = np.asarray(self.centers, dtype=float)
            if c.shape != (len(self.means), self.dim):
                raise BadSpec(f"centers must have shape ({len(self.means)}, {self.dim})")

    @property
    def n_classes(self) -> int:
        return len(self.means)


def class_centers(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.centers is not None:
        return np.asarray(spec.centers, dtype=float)
    G, D = spec.n_classes, spec.dim
    raw = rng.standard_normal((D, max(G, D)))
    if G <= D:
        q, _ = np.linalg.qr(raw[:, :G])
        dirs = q.T
    else:
        dirs = raw[:, :G].T
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return spec.radius * dirs


def sample_survival_times(labels, means, variance, censor_quantile, rng):
    """True event times, then censoring times drawn after all of them.

    Returns ``(t, c)``; observed time is ``min(t, c)`` and the event flag
    is ``t <= c``.
    """
    m = np.asarray(means, dtype=float)[np.asarray(labels)]
    t = rng.gamma(shape=m * m / variance, scale=variance / m)
    upper = np.quantile(t, censor_quantile)
    c = rng.uniform(t.min(), upper, size=t.size)
    return t, c


def generate_synthetic(spec: SyntheticSpec) -> tuple[SurvivalDataset, np.ndarray]:
    """Draw a dataset with known class structure; returns (dataset, class labels)."""
    rng = np.random.default_rng(spec.seed)
    centers = class_centers(spec, rng)
    G, n = spec.n_classes, spec.n_samples
    labels = rng.permutation(np.arange(n) % G)
    X = centers[labels] + spec.spread * rng.standard_normal((n, spec.dim))
    t, c = sample_survival_times(labels, spec.means, spec.variance, spec.censor_quantile, rng)
    y = np.minimum(t, c)
    event = (t <= c).astype(np.int64)
    schema = FeatureSchema.continuous([f"x{j}" for j in range(spec.dim)])
    return SurvivalDataset(X, y, event, schema), labels
