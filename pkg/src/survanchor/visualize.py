"""Figure data and SVG rendering.

Every builder returns a JSON-ready description of the figure. ``render_svg``
turns such a description into SVG text, so figures can be re-rendered from
their JSON alone.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .data import FeatureSchema, discretize_column
from .errors import DegenerateFeature, EmptyGroup, GridMismatch, RankDeficient
from .svg import SvgCanvas, colormap, _num

SCHEMA_VERSION = 1
P_FLOOR = 1e-300
SUM_TOL = 1e-12


# --- heatmaps ---------------------------------------------------------------------------

@dataclass(eq=False)
class HeatmapSpec:
    """Cell matrix with labels; None marks an empty cell.

    ``origin="lower"`` draws row 0 at the bottom (used for time axes).
    ``row_groups`` holds (name, start, stop) row blocks, one per feature.
    """

    cells: list
    row_labels: list[str]
    col_labels: list[str]
    title: str = ""
    variant: str = "generic"
    colormap: str = "sequential"
    value_range: tuple[float, float] = (0.0, 1.0)
    row_groups: list = field(default_factory=list)
    origin: str = "upper"
    col_counts: list | None = None
    row_axis: str = ""
    col_axis: str = "projection bin midpoint"

    def __post_init__(self):
        self.cells = [[None if v is None else float(v) for v in row] for row in self.cells]
        if len(self.cells) != len(self.row_labels):
            raise GridMismatch(f"{len(self.cells)} rows but {len(self.row_labels)} row labels")
        lo, hi = self.value_range
        for row in self.cells:
            if len(row) != len(self.col_labels):
                raise GridMismatch(f"row of {len(row)} cells but {len(self.col_labels)} column labels")
            for v in row:
                if v is not None and not (lo - SUM_TOL <= v <= hi + SUM_TOL):
                    raise ValueError(f"cell value {v} outside {self.value_range}")
        self.value_range = (float(lo), float(hi))
        self.row_groups = [tuple(g) for g in self.row_groups]

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.row_labels), len(self.col_labels)

    def to_json(self) -> dict:
        return {"kind": "heatmap", "schema_version": SCHEMA_VERSION, "variant": self.variant,
                "title": self.title, "cells": self.cells, "row_labels": list(self.row_labels),
                "col_labels": list(self.col_labels), "colormap": self.colormap,
                "value_range": list(self.value_range),
                "row_groups": [list(g) for g in self.row_groups], "origin": self.origin,
                "col_counts": self.col_counts, "row_axis": self.row_axis, "col_axis": self.col_axis}

    @classmethod
    def from_json(cls, d) -> "HeatmapSpec":
        keys = ("cells", "row_labels", "col_labels", "title", "variant", "colormap", "row_groups",
                "origin", "col_counts", "row_axis", "col_axis")
        return cls(**{k: d[k] for k in keys if k in d}, value_range=tuple(d["value_range"]))


def _fmt_mid(x: float) -> str:
    return f"{x:.2f}"


def _block_labels(spec, descriptors) -> list[str]:
    if spec.kind == "indicator":
        return [f"1 - {spec.name}", spec.name]
    return [f"{spec.name}: {d}" for d in descriptors]


def raw_feature_heatmap(binning, features, schema: FeatureSchema, title: str = "") -> HeatmapSpec:
    """Fraction of each bin's rows at each feature level, one row block per feature.

    Indicator features get two rows: the indicator and one minus it.
    Features that cannot be discretized are skipped.
    """
    X = np.asarray(features, dtype=float)
    if X.shape[0] != binning.bin_of_row.size:
        raise GridMismatch("features must be row-aligned with the binning")
    members = binning.members
    cells, labels, groups = [], [], []
    for j, spec in enumerate(schema):
        try:
            disc = discretize_column(X[:, j], spec)
        except DegenerateFeature:
            continue
        start = len(labels)
        n_levels = len(disc.descriptors)
        block = np.full((n_levels, binning.m), np.nan)
        for b, idx in enumerate(members):
            if idx.size:
                block[:, b] = np.bincount(disc.labels[idx], minlength=n_levels)[:n_levels] / idx.size
        for i in range(n_levels):
            cells.append([None if np.isnan(v) else float(v) for v in block[i]])
        labels.extend(_block_labels(spec, disc.descriptors))
        groups.append((spec.name, start, len(labels)))
    return HeatmapSpec(cells, labels, [_fmt_mid(m) for m in binning.midpoints], title,
                       "raw_feature", "sequential", (0.0, 1.0), groups, "upper",
                       binning.counts.tolist(), "feature level")


def survival_grid(t_min: float, t_max: float, n_points: int = 50) -> np.ndarray:
    return np.linspace(float(t_min), float(t_max), n_points)


def survival_heatmap(bin_curves, t_min: float, t_max: float, col_labels, n_points: int = 50,
                     title: str = "") -> HeatmapSpec:
    """Per-bin survival probabilities on an evenly spaced time grid; time increases upward."""
    grid = survival_grid(t_min, t_max, n_points)
    col_labels = list(col_labels)
    if len(col_labels) != len(bin_curves):
        raise GridMismatch("one column label per bin curve is required")
    cols = [None if c is None else c.at(grid) for c in bin_curves]
    cells = [[None if c is None else float(c[i]) for c in cols] for i in range(grid.size)]
    return HeatmapSpec(cells, [f"{t:.4g}" for t in grid], col_labels, title, "survival",
                       "sequential", (0.0, 1.0), [], "lower", None, "time")


def average_projection_heatmap(group_labels, projections: dict, group_order=None,
                               title: str = "") -> HeatmapSpec:
    """Mean projection onto each anchor (columns) among rows of each group (rows)."""
    labels = np.asarray([str(g) for g in group_labels])
    order = sorted(set(labels.tolist())) if group_order is None else [str(g) for g in group_order]
    names = list(projections)
    if not names:
        raise ValueError("need at least one anchor")
    P = {k: np.asarray(v, dtype=float) for k, v in projections.items()}
    for k, v in P.items():
        if v.size != labels.size:
            raise GridMismatch(f"projections for {k} are not row-aligned with the labels")
    cells = []
    for g in order:
        rows = labels == g
        if not rows.any():
            raise EmptyGroup(f"group {g!r} has no rows")
        cells.append([float(np.clip(P[k][rows].mean(), -1.0, 1.0)) for k in names])
    return HeatmapSpec(cells, order, names, title, "average_projection", "diverging",
                       (-1.0, 1.0), [], "upper", None, "group", "anchor")


def check_heatmap(spec) -> list[str]:
    """Invariant violations for a heatmap (empty list when all hold)."""
    if not isinstance(spec, HeatmapSpec):
        spec = HeatmapSpec.from_json(spec)
    problems = []
    cells = spec.cells
    if spec.variant == "raw_feature":
        for name, start, stop in spec.row_groups:
            for j in range(len(spec.col_labels)):
                col = [cells[i][j] for i in range(start, stop)]
                if all(v is None for v in col):
                    continue
                if any(v is None for v in col):
                    problems.append(f"{name}: column {j} mixes empty and filled cells")
                    continue
                total = math.fsum(col)
                if abs(total - 1.0) > SUM_TOL:
                    problems.append(f"{name}: column {j} sums to {total!r}")
    if spec.variant == "survival":
        for j in range(len(spec.col_labels)):
            col = [row[j] for row in cells]
            if all(v is None for v in col):
                continue
            if any(v is None for v in col):
                problems.append(f"column {j} mixes empty and filled cells")
                continue
            if any(b > a for a, b in zip(col, col[1:])):
                problems.append(f"column {j} increases in time")
    return problems


# --- violin -----------------------------------------------------------------------------

def silverman_bandwidth(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return 0.0
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75.0, 25.0])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return 0.9 * spread * x.size ** (-0.2)


def violin_data(report, n_grid: int = 64) -> dict:
    """Gaussian-kernel density of log10 p per k, plus the raw points."""
    pvalues = report.pvalues if hasattr(report, "pvalues") else \
        {int(k): v for k, v in report["pvalues"].items()}
    if not pvalues:
        raise ValueError("report holds no p-values")
    violins = []
    for k in sorted(pvalues):
        logp = np.log10(np.maximum(np.asarray(pvalues[k], dtype=float), P_FLOOR))
        entry = {"k": int(k), "log10_p": logp.tolist(), "max_p": float(10 ** logp.max()) if logp.size else None}
        bw = silverman_bandwidth(logp)
        if logp.size == 0 or bw <= 0:
            entry.update(degenerate=True, bandwidth=0.0, grid=[], density=[])
        else:
            grid = np.linspace(logp.min() - 3 * bw, logp.max() + 3 * bw, n_grid)
            z = (grid[:, None] - logp[None, :]) / bw
            dens = np.exp(-0.5 * z * z).sum(axis=1) / (logp.size * bw * math.sqrt(2 * math.pi))
            entry.update(degenerate=False, bandwidth=bw, grid=grid.tolist(), density=dens.tolist())
        violins.append(entry)
    threshold = getattr(report, "threshold", None)
    if threshold is None and isinstance(report, dict):
        threshold = report.get("threshold")
    chosen = getattr(report, "chosen_k", None) if not isinstance(report, dict) else report.get("chosen_k")
    return {"kind": "violin", "schema_version": SCHEMA_VERSION, "title": "pairwise log-rank p-values",
            "violins": violins, "threshold": threshold, "chosen_k": chosen}


# --- scatter ----------------------------------------------------------------------------

def _padded_range(v: np.ndarray, pad: float = 0.02) -> list[float]:
    lo, hi = float(v.min()), float(v.max())
    width = hi - lo
    if width == 0:
        width = max(abs(lo), 1.0)
    return [lo - pad * width, hi + pad * width]


def running_median(x, y, window: int | None = None, n_out: int = 100):
    order = np.argsort(x, kind="stable")
    xs, ys = np.asarray(x, dtype=float)[order], np.asarray(y, dtype=float)[order]
    n = xs.size
    w = max(1, n // 10) if window is None else window
    half = w // 2
    pos = np.unique(np.linspace(0, n - 1, min(n, n_out)).round().astype(int))
    med = [float(np.median(ys[max(0, i - half): i + half + 1])) for i in pos]
    return xs[pos].tolist(), med


def scatter_feature_vs_projection(feature_values, projections, feature_name: str = "feature",
                                  anchor_name: str = "", with_median: bool = True) -> dict:
    y = np.asarray(feature_values, dtype=float)
    x = np.asarray(projections, dtype=float)
    if x.shape != y.shape:
        raise GridMismatch("feature values and projections must be aligned")
    out = {"kind": "scatter", "schema_version": SCHEMA_VERSION, "variant": "feature_vs_projection",
           "title": f"{feature_name} vs projection {anchor_name}".strip(),
           "x_label": f"projection {anchor_name}".strip(), "y_label": feature_name,
           "x": x.tolist(), "y": y.tolist(),
           "x_range": _padded_range(x), "y_range": _padded_range(y)}
    if with_median and x.size:
        mx, my = running_median(x, y)
        out["median_x"], out["median_y"] = mx, my
    return out


# --- per-bin samples --------------------------------------------------------------------

def bin_sample_table(binning, ids, sample_size: int, seed: int = 0) -> dict:
    if sample_size < 1:
        raise ValueError("sample size must be at least 1")
    ids = [str(i) for i in ids]
    if len(ids) != binning.bin_of_row.size:
        raise GridMismatch("ids must be row-aligned with the binning")
    rng = np.random.default_rng(seed)
    bins = []
    for j, idx in enumerate(binning.members):
        if idx.size <= sample_size:
            pick = idx
        else:
            pick = np.sort(rng.choice(idx, size=sample_size, replace=False))
        bins.append({"bin": j, "interval": binning.intervals()[j],
                     "midpoint": float(binning.midpoints[j]), "size": int(idx.size),
                     "ids": [ids[i] for i in pick]})
    return {"kind": "table", "schema_version": SCHEMA_VERSION, "variant": "bin_samples",
            "title": "sampled rows per projection bin", "seed": seed, "bins": bins}


# --- PCA --------------------------------------------------------------------------------

def principal_axes(X, n_components: int = 2, tol: float = 1e-10, max_iter: int = 100_000):
    """Top principal axes by power iteration with deflation.

    Returns (axes as rows, variances). Raises RankDeficient when fewer than
    ``n_components`` directions carry nonzero variance.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    Xc = X - X.mean(axis=0)
    C = Xc.T @ Xc / max(n - 1, 1)
    scale = float(np.trace(C))
    if scale <= 0:
        raise RankDeficient("data has no variance")
    rng = np.random.default_rng(0)
    axes, variances = [], []
    deflated = C.copy()
    for c in range(n_components):
        v = rng.standard_normal(d)
        for a in axes:
            v -= (a @ v) * a
        v /= np.linalg.norm(v)
        for _ in range(max_iter):
            w = deflated @ v
            for a in axes:
                w -= (a @ w) * a
            norm = float(np.linalg.norm(w))
            if norm <= 1e-13 * scale:
                break
            w /= norm
            step = float(np.linalg.norm(w - v))
            lam = float(w @ C @ w)
            resid = float(np.linalg.norm(C @ w - lam * w))
            v = w
            if step < tol or resid < tol * scale:
                break
        lam = float(v @ C @ v)
        if lam <= 1e-12 * scale:
            raise RankDeficient(f"only {c} direction(s) with nonzero variance")
        axes.append(v)
        variances.append(lam)
        deflated = deflated - lam * np.outer(v, v)
    return np.vstack(axes), np.asarray(variances)


def pca_scatter(rows, color_values=None, color_label: str = "") -> dict:
    X = np.asarray(getattr(rows, "embeddings", rows), dtype=float)
    n, d = X.shape
    if n < 3 or d < 2:
        raise ValueError("PCA needs at least 3 rows and 2 dimensions")
    fallback = None
    try:
        axes, var = principal_axes(X, 2)
    except RankDeficient:
        axes, var = principal_axes(X, 1)
        fallback = "1d"
    coords = (X - X.mean(axis=0)) @ axes.T
    if coords.shape[1] == 1:
        coords = np.hstack([coords, np.zeros((n, 1))])
    colors = None
    if color_values is not None:
        colors = [None if c is None or not np.isfinite(c) else float(c) for c in color_values]
        if len(colors) != n:
            raise GridMismatch("one color value per row is required")
    total = float(np.trace(np.cov(X.T)))
    return {"kind": "scatter", "schema_version": SCHEMA_VERSION, "variant": "pca",
            "title": "PCA of embeddings", "x_label": "PC1", "y_label": "PC2",
            "x": coords[:, 0].tolist(), "y": coords[:, 1].tolist(), "color": colors,
            "color_label": color_label, "axes": axes.tolist(),
            "explained_variance": var.tolist(), "total_variance": total,
            "x_range": _padded_range(coords[:, 0]), "y_range": _padded_range(coords[:, 1]),
            "fallback": fallback}


# --- rendering --------------------------------------------------------------------------

def _render_heatmap(spec: dict) -> str:
    h = HeatmapSpec.from_json(spec)
    n_rows, n_cols = h.shape
    cw, ch = 46, 14 if n_rows > 20 else 22
    left, top, right, bottom = 190, 40, 90, 60
    width = left + n_cols * cw + right
    height = max(top + n_rows * ch + bottom, top + 230)
    cv = SvgCanvas(width, height)
    cv.text(width / 2, 22, h.title, size=14, anchor="middle")
    lo, hi = h.value_range
    for i, row in enumerate(h.cells):
        yrow = (n_rows - 1 - i) if h.origin == "lower" else i
        y = top + yrow * ch
        cv.text(left - 6, y + ch * 0.7, h.row_labels[i], size=9, anchor="end")
        for j, v in enumerate(row):
            cv.rect(left + j * cw, y, cw, ch, fill=colormap(h.colormap, v, lo, hi))
    for _, start, _stop in h.row_groups[1:]:
        y = top + start * ch
        cv.line(left, y, left + n_cols * cw, y, stroke="#000000", stroke_width=1.5)
    base = top + n_rows * ch
    for j, lab in enumerate(h.col_labels):
        cv.text(left + (j + 0.5) * cw, base + 14, lab, size=9, anchor="middle")
    cv.text(left + n_cols * cw / 2, base + 34, h.col_axis, size=11, anchor="middle")
    if h.row_axis:
        cv.text(14, top + n_rows * ch / 2, h.row_axis, size=11, anchor="middle", rotate=-90)
    # color bar
    bx = left + n_cols * cw + 20
    steps = 20
    for s in range(steps):
        val = lo + (hi - lo) * (s + 0.5) / steps
        cv.rect(bx, top + (steps - 1 - s) * 8, 14, 8, fill=colormap(h.colormap, val, lo, hi))
    cv.text(bx + 18, top + 8, _num(hi), size=9)
    cv.text(bx + 18, top + steps * 8, _num(lo), size=9)
    if any(v is None for row in h.cells for v in row):
        cv.rect(bx, top + steps * 8 + 16, 14, 8, fill=colormap(h.colormap, None))
        cv.text(bx + 18, top + steps * 8 + 24, "empty", size=9)
    return cv.to_string()


class _Axes:
    def __init__(self, cv, x0, y0, w, h, xr, yr):
        self.cv, self.x0, self.y0, self.w, self.h = cv, x0, y0, w, h
        self.xr, self.yr = xr, yr

    def px(self, x):
        lo, hi = self.xr
        return self.x0 + (x - lo) / (hi - lo) * self.w

    def py(self, y):
        lo, hi = self.yr
        return self.y0 + self.h - (y - lo) / (hi - lo) * self.h

    def frame(self, xlabel, ylabel, n_ticks=5):
        cv = self.cv
        cv.rect(self.x0, self.y0, self.w, self.h, fill="none", stroke="#000000")
        for t in np.linspace(*self.xr, n_ticks):
            cv.text(self.px(t), self.y0 + self.h + 14, f"{t:.3g}", size=9, anchor="middle")
        for t in np.linspace(*self.yr, n_ticks):
            cv.text(self.x0 - 5, self.py(t) + 3, f"{t:.3g}", size=9, anchor="end")
        cv.text(self.x0 + self.w / 2, self.y0 + self.h + 32, xlabel, size=11, anchor="middle")
        cv.text(self.x0 - 42, self.y0 + self.h / 2, ylabel, size=11, anchor="middle", rotate=-90)


def _render_scatter(spec: dict) -> str:
    cv = SvgCanvas(520, 440)
    cv.text(260, 22, spec.get("title", ""), size=14, anchor="middle")
    ax = _Axes(cv, 70, 40, 400, 340, spec["x_range"], spec["y_range"])
    ax.frame(spec.get("x_label", ""), spec.get("y_label", ""))
    colors = spec.get("color")
    finite = [c for c in colors if c is not None] if colors else []
    cmin, cmax = (min(finite), max(finite)) if finite else (0.0, 1.0)
    for i, (x, y) in enumerate(zip(spec["x"], spec["y"])):
        fill = colormap("sequential", colors[i], cmin, cmax) if colors else "#1f77b4"
        cv.circle(ax.px(x), ax.py(y), 2, fill=fill, fill_opacity=0.6)
    if spec.get("median_x"):
        cv.polyline([ax.px(x) for x in spec["median_x"]], [ax.py(y) for y in spec["median_y"]],
                    stroke="#d62728", stroke_width=2)
    if spec.get("variant") == "pca":
        th = np.linspace(0, 2 * np.pi, 181)
        cv.polyline([ax.px(math.cos(t)) for t in th], [ax.py(math.sin(t)) for t in th],
                    stroke="#888888", stroke_dasharray="4 3")
    return cv.to_string()


def _render_violin(spec: dict) -> str:
    violins = spec["violins"]
    all_y = [v for vi in violins for v in vi["log10_p"] + vi["grid"]]
    ymin = math.floor(min(min(all_y, default=-1.0), -2.5)) - 0.5
    ymax = max(max(all_y, default=0.0), 0.0) + 0.5
    width = 90 + 70 * len(violins) + 30
    cv = SvgCanvas(width, 430)
    cv.text(width / 2, 22, spec.get("title", ""), size=14, anchor="middle")
    ax = _Axes(cv, 70, 50, 70 * len(violins), 320, (0.0, float(len(violins))), (ymin, ymax))
    cv.rect(ax.x0, ax.y0, ax.w, ax.h, fill="none", stroke="#000000")
    for t in np.linspace(ymin, ymax, 6):
        cv.text(ax.x0 - 5, ax.py(t) + 3, f"{t:.3g}", size=9, anchor="end")
    cv.text(ax.x0 - 42, ax.y0 + ax.h / 2, "log10 p-value", size=11, anchor="middle", rotate=-90)
    if spec.get("threshold"):
        y = ax.py(math.log10(spec["threshold"]))
        cv.line(ax.x0, y, ax.x0 + ax.w, y, stroke="#888888", stroke_dasharray="4 3")
    for i, vi in enumerate(violins):
        cx = ax.px(i + 0.5)
        cv.text(cx, ax.y0 + ax.h + 14, str(vi["k"]), size=10, anchor="middle")
        if not vi["degenerate"]:
            dens = np.asarray(vi["density"])
            half = 28 * dens / dens.max()
            ys = [ax.py(g) for g in vi["grid"]]
            xs = [cx + h for h in half] + [cx - h for h in half[::-1]]
            cv.polygon(xs, ys + ys[::-1], fill="#9ecae1", stroke="#3182bd")
        for p in vi["log10_p"]:
            cv.circle(cx, ax.py(p), 3 if vi["degenerate"] else 1.5, fill="#08306b")
    cv.text(ax.x0 + ax.w / 2, ax.y0 + ax.h + 32, "number of clusters k", size=11, anchor="middle")
    return cv.to_string()


def _render_table(spec: dict) -> str:
    rows = [(b["interval"], b["size"], ", ".join(b["ids"])) for b in spec.get("bins", [])]
    rows += [tuple(r) for r in spec.get("rows", [])]
    header = spec.get("header", ["bin", "size", "sampled ids"])
    width, line = 900, 18
    cv = SvgCanvas(width, 60 + line * (len(rows) + 1))
    cv.text(width / 2, 22, spec.get("title", ""), size=14, anchor="middle")
    xs = [10, 150, 230][:len(header)] if len(header) <= 3 else \
        [10 + i * (width - 20) / len(header) for i in range(len(header))]
    for x, h in zip(xs, header):
        cv.text(x, 48, h, size=11, font_weight="bold")
    for r, row in enumerate(rows):
        for x, cell in zip(xs, row):
            cv.text(x, 48 + line * (r + 1), cell, size=10)
    return cv.to_string()


_RENDERERS = {"heatmap": _render_heatmap, "scatter": _render_scatter,
              "violin": _render_violin, "table": _render_table}


def render_svg(spec) -> str:
    if hasattr(spec, "to_json"):
        spec = spec.to_json()
    try:
        return _RENDERERS[spec["kind"]](spec)
    except KeyError:
        raise ValueError(f"unknown figure kind {spec.get('kind')!r}") from None


def dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1, allow_nan=False)
        fh.write("\n")


def write_figure(spec, out_dir, name: str) -> list[str]:
    """Write ``<name>.json`` and ``<name>.svg``; returns heatmap invariant violations."""
    if hasattr(spec, "to_json"):
        spec = spec.to_json()
    os.makedirs(out_dir, exist_ok=True)
    dump_json(spec, os.path.join(out_dir, f"{name}.json"))
    with open(os.path.join(out_dir, f"{name}.svg"), "w", encoding="utf-8") as fh:
        fh.write(render_svg(spec))
    return check_heatmap(spec) if spec["kind"] == "heatmap" else []


def render_directory(directory) -> list[str]:
    """Re-render every figure JSON under ``directory``; returns the SVG paths written."""
    written = []
    for root, _dirs, files in sorted(os.walk(directory)):
        for fname in sorted(files):
            if not fname.endswith(".json"):
                continue
            path = os.path.join(root, fname)
            with open(path, encoding="utf-8") as fh:
                try:
                    spec = json.load(fh)
                except json.JSONDecodeError:
                    continue
            if not isinstance(spec, dict) or spec.get("kind") not in _RENDERERS:
                continue
            svg_path = path[:-5] + ".svg"
            with open(svg_path, "w", encoding="utf-8") as fh:
                fh.write(render_svg(spec))
            written.append(svg_path)
    return written
