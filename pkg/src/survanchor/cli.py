"""Command-line pipeline: synth -> train -> analyze, plus render.

Configuration is an INI file. Each stage writes into one output directory
and records its resolved configuration, seeds and versions in ``run.json``.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import os
import platform
import sys
import warnings
from dataclasses import dataclass, field
from importlib import metadata

import numpy as np

from . import kernels
from .anchors import (bin_projections, bin_survival, center_of_mass, clumping_diagnostic,
                      cluster_anchor, concept_anchor, project, rank_anchors)
from .assoc import TESTS, fdr_threshold, rank_features
from .clusterlib import KSelectionReport, fit_mixture, k_sweep
from .coxnet import CoxMlpModel, TrainConfig, encode_dataset, export_bundle, import_bundle, train, \
    write_training_log
from .data import (DEFAULT_FRACTIONS, FeatureSchema, FeatureSpec, SyntheticSpec, generate_synthetic,
                   load_csv, make_splits, save_csv, write_manifest)
from .errors import ConfigError, DataError, NumericalError, SurvAnchorError, ZeroAnchor
from .survstats import (BeyondMaxTime, concordance_index, median_to_json,
                        predict_survival_matrix)
from .visualize import (average_projection_heatmap, bin_sample_table, dump_json, pca_scatter,
                        raw_feature_heatmap, render_directory, scatter_feature_vs_projection,
                        survival_heatmap, violin_data, write_figure)

log = logging.getLogger("survanchor")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


# --- configuration ----------------------------------------------------------------------

def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(";", ",").split(",") if x.strip())


@dataclass
class RunConfig:
    source: str
    data_path: str | None
    time_col: str
    event_col: str
    id_col: str | None
    schema: FeatureSchema | None
    synthetic: SyntheticSpec | None
    fractions: tuple[float, ...]
    split_seed: int
    train: TrainConfig
    cluster_kind: str
    k_range: tuple[int, int]
    k: int | None
    n_init: int
    cluster_seed: int
    knee_threshold: float
    use_clusters: bool
    concepts: list[str]
    bins: int
    alpha: float
    sample_size: int
    sample_seed: int
    n_scatter: int
    clumping_threshold: float
    test: str
    fdr_q: float | None
    out_dir: str
    seed: int
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k not in ("schema", "synthetic", "train", "extra")}
        d["schema"] = self.schema.to_list() if self.schema is not None else None
        d["synthetic"] = None if self.synthetic is None else {
            k: (list(v) if isinstance(v, tuple) else v) for k, v in self.synthetic.__dict__.items()}
        d["train"] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.train.__dict__.items()}
        d["fractions"] = list(self.fractions)
        d["k_range"] = list(self.k_range)
        d.pop("out_dir")
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _feature_spec(name: str, sec) -> FeatureSpec:
    kind = sec.get("kind", "continuous").strip()
    levels = tuple(x.strip() for x in sec.get("levels", "").split(",") if x.strip())
    rule = sec.get("rule", "").strip()
    try:
        if not rule:
            spec = FeatureSpec.default(name, kind, levels)
        elif rule in ("quartile", "identity"):
            spec = FeatureSpec(name, kind, levels, rule)
        else:
            spec = FeatureSpec(name, kind, levels, _floats(rule))
    except (DataError, ValueError) as exc:
        raise ConfigError(f"[feature.{name}]: {exc}") from None
    return spec


def load_config(path: str | None, args) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    base = os.getcwd()
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"config file {path!r} not found")
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        base = os.path.dirname(os.path.abspath(path))

    def sec(name):
        return cp[name] if cp.has_section(name) else {}

    try:
        run = sec("run")
        seed = int(args.seed) if getattr(args, "seed", None) is not None else int(run.get("seed", 0))

        def seeded(section):
            s = sec(section)
            if getattr(args, "seed", None) is not None:
                return seed
            return int(s.get("seed", seed))

        data = sec("data")
        source = data.get("source", "synthetic").strip()
        if source not in ("synthetic", "csv"):
            raise ConfigError(f"[data] source must be synthetic or csv, got {source!r}")
        data_path = None
        if source == "csv":
            raw = os.path.expandvars(data.get("path", "")).strip()
            if not raw or "$" in raw:
                raise ConfigError("[data] path is required for csv sources (environment variable unset?)")
            data_path = raw if os.path.isabs(raw) else os.path.join(base, raw)

        schema = None
        feature_secs = [s for s in cp.sections() if s.startswith("feature.")]
        if feature_secs:
            schema = FeatureSchema(tuple(_feature_spec(s[len("feature."):], cp[s]) for s in feature_secs))
        elif source == "csv":
            raise ConfigError("csv sources need [feature.<name>] sections")

        synthetic = None
        if source == "synthetic":
            s = sec("synthetic")
            kw = {}
            if "means" in s:
                kw["means"] = _floats(s["means"])
            for key, conv in (("variance", float), ("censor_quantile", float), ("n_samples", int),
                              ("dim", int), ("radius", float), ("spread", float)):
                if key in s:
                    kw[key] = conv(s[key])
            synthetic = SyntheticSpec(seed=seeded("synthetic"), **kw)

        split = sec("split")
        fractions = _floats(split["fractions"]) if "fractions" in split else DEFAULT_FRACTIONS

        t = sec("train")
        tkw = {}
        for key in ("batch_sizes", "layer_counts", "embedding_dims"):
            if key in t:
                tkw[key] = _ints(t[key])
        if "learning_rates" in t:
            tkw["learning_rates"] = _floats(t["learning_rates"])
        for key in ("max_epochs", "patience", "n_jobs"):
            if key in t:
                tkw[key] = int(t[key])
        if "final_activation" in t:
            tkw["final_activation"] = t["final_activation"].strip()
        if "standardize" in t:
            tkw["standardize"] = cp.getboolean("train", "standardize")
        train_cfg = TrainConfig(seed=seeded("train"), **tkw)

        c = sec("cluster")
        kind = c.get("kind", "vmf").strip()
        if kind not in ("vmf", "gaussian"):
            raise ConfigError(f"[cluster] kind must be vmf or gaussian, got {kind!r}")
        k_range = (int(c.get("k_min", 2)), int(c.get("k_max", 8)))
        if not 1 <= k_range[0] <= k_range[1]:
            raise ConfigError(f"bad k range {k_range}")
        k_text = str(c.get("k", "auto")).strip()
        k = None if k_text == "auto" else int(k_text)
        if getattr(args, "k", None) is not None:
            k = args.k

        a = sec("anchors")
        concepts = [x.strip() for x in a.get("concepts", "").split(";") if x.strip()]
        concepts += list(getattr(args, "concept", None) or [])
        bins = int(args.bins) if getattr(args, "bins", None) is not None else int(a.get("bins", 7))

        s = sec("assoc")
        test = getattr(args, "test", None) or s.get("test", "chi2").strip()
        if test not in TESTS:
            raise ConfigError(f"test must be one of {TESTS}, got {test!r}")
        q_text = str(s.get("fdr_q", "")).strip()
        fdr_q = float(q_text) if q_text else None
        if getattr(args, "fdr_q", None) is not None:
            fdr_q = args.fdr_q

        out = getattr(args, "out", None) or sec("output").get("dir", "")
        if not out:
            stem = os.path.splitext(os.path.basename(path))[0] if path else "run"
            out = os.path.join("runs", stem)
        elif not os.path.isabs(out) and not getattr(args, "out", None):
            out = os.path.join(base, out)

        cfg = RunConfig(
            source=source, data_path=data_path, time_col=data.get("time_col", "time"),
            event_col=data.get("event_col", "event"), id_col=data.get("id_col") or None,
            schema=schema, synthetic=synthetic, fractions=fractions, split_seed=seeded("split"),
            train=train_cfg, cluster_kind=kind, k_range=k_range, k=k,
            n_init=int(c.get("n_init", 5)), cluster_seed=seeded("cluster"),
            knee_threshold=float(c.get("threshold", 0.01)),
            use_clusters=str(a.get("clusters", "true")).lower() in ("1", "true", "yes", "on"),
            concepts=concepts, bins=bins, alpha=float(a.get("alpha", 0.1)),
            sample_size=int(a.get("sample_size", 5)), sample_seed=seeded("anchors"),
            n_scatter=int(a.get("scatter_features", 3)),
            clumping_threshold=float(a.get("clumping_threshold", 0.5)),
            test=test, fdr_q=fdr_q, out_dir=out, seed=seed)
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad configuration value: {exc}") from None
    if cfg.bins < 1:
        raise ConfigError("bins must be at least 1")
    if not 0 < cfg.alpha <= 1:
        raise ConfigError("alpha must lie in (0, 1]")
    return cfg


# --- bookkeeping ---------------------------------------------------------------------------

def _versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "package": pkg,
            "kernel_backend": kernels.BACKEND}


def _record_run(cfg: RunConfig, stage: str, **info) -> None:
    path = os.path.join(cfg.out_dir, "run.json")
    run = {}
    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            run = json.load(fh)
    run.setdefault("stages", {})[stage] = {
        "config_hash": cfg.config_hash(), "config": cfg.to_dict(), "versions": _versions(),
        "seeds": {"run": cfg.seed, "split": cfg.split_seed, "train": cfg.train.seed,
                  "cluster": cfg.cluster_seed, "samples": cfg.sample_seed,
                  "synthetic": cfg.synthetic.seed if cfg.synthetic else None},
        **info}
    dump_json(run, path)


def _paths(cfg: RunConfig) -> dict:
    o = cfg.out_dir
    return {
        "data": os.path.join(o, "data"),
        "dataset": os.path.join(o, "data", "dataset.csv"),
        "manifest": os.path.join(o, "data", "manifest.json"),
        "labels": os.path.join(o, "data", "true_labels.csv"),
        "splits": os.path.join(o, "data", "splits.csv"),
        "anchor_rows": os.path.join(o, "data", "anchor_rows.csv"),
        "vis_rows": os.path.join(o, "data", "visualization_rows.csv"),
        "model_dir": os.path.join(o, "model"),
        "model": os.path.join(o, "model", "model.json"),
        "summary": os.path.join(o, "model", "train_summary.json"),
        "train_log": os.path.join(o, "model", "training_log.csv"),
        "anchor_bundle": os.path.join(o, "bundles", "anchor.json"),
        "vis_bundle": os.path.join(o, "bundles", "visualization.json"),
        "analysis": os.path.join(o, "analysis"),
    }


# --- stages ----------------------------------------------------------------------------------

def cmd_synth(cfg: RunConfig) -> dict:
    if cfg.synthetic is None:
        raise ConfigError("synth needs [data] source = synthetic")
    p = _paths(cfg)
    os.makedirs(p["data"], exist_ok=True)
    ds, labels = generate_synthetic(cfg.synthetic)
    save_csv(ds, p["dataset"])
    with open(p["labels"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "label"])
        w.writerows(zip(ds.ids.tolist(), labels.tolist()))
    manifest = write_manifest(p["manifest"], ds, class_means=list(cfg.synthetic.means))
    _record_run(cfg, "synth", rows=ds.n)
    log.info("synthetic data: %d rows, censoring rate %.3f", ds.n, manifest["censoring_rate"])
    return manifest


def _load_dataset(cfg: RunConfig):
    p = _paths(cfg)
    if cfg.source == "synthetic":
        if not os.path.exists(p["dataset"]):
            raise ConfigError(f"{p['dataset']} not found; run the synth stage first")
        schema = cfg.schema or FeatureSchema.continuous([f"x{j}" for j in range(cfg.synthetic.dim)])
        return load_csv(p["dataset"], schema, "time", "event", "id")
    if not os.path.exists(cfg.data_path):
        raise ConfigError(f"data file {cfg.data_path!r} not found")
    return load_csv(cfg.data_path, cfg.schema, cfg.time_col, cfg.event_col, cfg.id_col)


def cmd_train(cfg: RunConfig) -> dict:
    p = _paths(cfg)
    ds = _load_dataset(cfg)
    plan = make_splits(ds, cfg.fractions, cfg.split_seed)
    for d in (p["data"], p["model_dir"], os.path.dirname(p["anchor_bundle"])):
        os.makedirs(d, exist_ok=True)
    write_manifest(p["manifest"], ds, plan,
                   **({"class_means": list(cfg.synthetic.means)} if cfg.synthetic else {}))
    with open(p["splits"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "role"])
        w.writerows(zip(ds.ids.tolist(), plan.role_names()))
    save_csv(ds, p["anchor_rows"], rows=plan.indices("anchor"))
    save_csv(ds, p["vis_rows"], rows=plan.indices("visualization"))

    model = train(ds, plan, cfg.train)
    model.save(p["model"])
    write_training_log(model.training_log, p["train_log"])
    export_bundle(encode_dataset(model, ds, plan.indices("anchor")), p["anchor_bundle"])
    vis = plan.indices("visualization")
    export_bundle(encode_dataset(model, ds, vis), p["vis_bundle"])

    tr = plan.indices("train")
    summary = {"hyperparameters": model.hyperparameters,
               "train_time_range": [float(ds.time[tr].min()), float(ds.time[tr].max())],
               "split_counts": plan.counts()}
    try:
        summary["visualization_concordance"] = concordance_index(model.risk(ds.features[vis]),
                                                                 ds.time[vis], ds.event[vis])
    except NumericalError as exc:
        summary["visualization_concordance"] = None
        summary["concordance_error"] = str(exc)
    dump_json(summary, p["summary"])
    _record_run(cfg, "train", selected=model.hyperparameters)
    log.info("selected %s; visualization-row concordance %s", model.hyperparameters,
             summary["visualization_concordance"])
    return summary


def _concept_rows(path: str, filt: str) -> list[str]:
    """Ids of anchor rows whose column equals the value in a ``col=value`` filter."""
    if "=" not in filt:
        raise ConfigError(f"concept filter {filt!r} must look like column=value")
    col, value = (x.strip() for x in filt.split("=", 1))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if col not in (reader.fieldnames or []):
            raise ConfigError(f"concept column {col!r} not in anchor rows")
        ids = []
        for r in reader:
            cell = r[col].strip()
            try:
                match = float(cell) == float(value)
            except ValueError:
                match = cell == value
            if match:
                ids.append(r["id"])
    return ids


def _choose_k(cfg: RunConfig, report: KSelectionReport) -> tuple[int, str]:
    if cfg.k is not None:
        return cfg.k, "flag"
    if report.chosen_k is not None:
        return report.chosen_k, "rule"
    ks = sorted(report.pvalues)
    if not ks:
        raise NumericalError("no k in the sweep could be fitted")
    all_small = all(max(report.pvalues[k], default=0.0) <= cfg.knee_threshold for k in ks)
    return (ks[-1] if all_small else ks[0]), "fallback"


def _row_medians(S: np.ndarray, grid: np.ndarray) -> list:
    out = []
    for row in S:
        hit = np.flatnonzero(row <= 0.5)
        out.append(float(grid[hit[0]]) if hit.size else None)
    return out


def cmd_analyze(cfg: RunConfig) -> dict:
    p = _paths(cfg)
    for key in ("anchor_bundle", "vis_bundle", "model", "summary", "vis_rows", "manifest"):
        if not os.path.exists(p[key]):
            raise ConfigError(f"{p[key]} not found; run the train stage first")
    out = p["analysis"]
    os.makedirs(out, exist_ok=True)
    report_info = {"warnings": [], "heatmap_violations": {}, "failures": {}}

    with open(p["manifest"], encoding="utf-8") as fh:
        schema = FeatureSchema.from_list(json.load(fh)["schema"])
    with open(p["summary"], encoding="utf-8") as fh:
        summary = json.load(fh)
    model = CoxMlpModel.load(p["model"])
    A = import_bundle(p["anchor_bundle"])
    V = import_bundle(p["vis_bundle"])
    vis_ds = load_csv(p["vis_rows"], schema, "time", "event", "id")
    if list(vis_ds.ids) != list(V.ids):
        raise DataError("visualization rows and bundle are not row-aligned")
    if not A.has_labels:
        raise DataError("anchor bundle carries no survival labels")

    # choosing k and clustering
    ksel = k_sweep(A.embeddings, A.times, A.events, range(cfg.k_range[0], cfg.k_range[1] + 1),
                   cfg.cluster_kind, cfg.cluster_seed, cfg.n_init, threshold=cfg.knee_threshold)
    k, k_source = _choose_k(cfg, ksel)
    dump_json({**ksel.to_json(), "used_k": k, "k_source": k_source},
              os.path.join(out, "k_selection.json"))
    write_figure(violin_data(ksel), out, "violin")
    fit = ksel.fits.get(k) or fit_mixture(A.embeddings, k, cfg.cluster_kind, seed=cfg.cluster_seed,
                                          n_init=cfg.n_init)
    dump_json(fit.to_json(), os.path.join(out, "mixture.json"))

    # anchors
    center = center_of_mass(A)
    anchors = []
    if cfg.use_clusters:
        for j in range(k):
            try:
                anchors.append(cluster_anchor(A, fit, j, center))
            except (ZeroAnchor, DataError) as exc:
                report_info["failures"][f"cluster{j + 1}"] = str(exc)
    for filt in cfg.concepts:
        ids = set(_concept_rows(p["anchor_rows"], filt))
        rows = [i for i, rid in enumerate(A.ids) if rid in ids]
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                anchors.append(concept_anchor(A.subset(rows) if rows else np.zeros((0, A.d)),
                                              center, filt, visualization_ids=V.ids))
            except (ZeroAnchor, DataError) as exc:
                report_info["failures"][f"concept:{filt}"] = str(exc)
        report_info["warnings"] += [str(w.message) for w in caught]
    if not anchors:
        raise NumericalError("no usable anchor directions")
    dump_json({"center_of_mass": center.tolist(), "anchors": [a.to_json() for a in anchors]},
              os.path.join(out, "anchors.json"))

    # predicted survival for visualization rows
    base = model.baseline
    grid = base.event_times
    S = predict_survival_matrix(base, model.head(V.embeddings), grid)
    t_lo, t_hi = summary["train_time_range"]

    projections = {}
    for anchor in anchors:
        name = anchor.name
        adir = os.path.join(out, name.replace(":", "_").replace("=", "-"))
        os.makedirs(adir, exist_ok=True)
        proj = project(V, anchor)
        projections[name] = proj
        clump = clumping_diagnostic(proj)
        if clump > cfg.clumping_threshold:
            report_info["warnings"].append(
                f"{name}: {clump:.2f} of projections lie within 0.01 of +-1")
        binning = bin_projections(proj, cfg.bins)
        dump_json({"anchor": name, "ids": list(V.ids), "projections": proj.tolist(),
                   "clumping_fraction": clump, "binning": binning.to_json()},
                  os.path.join(adir, "projections.json"))
        mids = [f"{m:.2f}" for m in binning.midpoints]

        problems = write_figure(raw_feature_heatmap(binning, vis_ds.features, schema,
                                                    f"raw features by projection bin ({name})"),
                                adir, "raw_feature_heatmap")
        problems += write_figure(survival_heatmap(bin_survival(binning, S, grid), t_lo, t_hi, mids,
                                                  title=f"survival by projection bin ({name})"),
                                 adir, "survival_heatmap")
        if problems:
            report_info["heatmap_violations"][name] = problems

        ranking = rank_features(vis_ds.features, schema, proj, binning, cfg.test, name)
        rank_json = ranking.to_json()
        if cfg.fdr_q is not None and ranking.scores:
            fdr = fdr_threshold([s.p_value for s in ranking.scores], cfg.fdr_q)
            rank_json["fdr"] = {"q": cfg.fdr_q, "threshold": fdr.threshold,
                                "accepted": [ranking.scores[i].feature for i in fdr.accepted]}
        dump_json(rank_json, os.path.join(adir, "feature_ranking.json"))
        with open(os.path.join(adir, "feature_ranking.csv"), "w", encoding="utf-8") as fh:
            fh.write(ranking.to_csv())
        for score in ranking.scores[:cfg.n_scatter]:
            if schema[score.feature].kind == "categorical":
                continue
            write_figure(scatter_feature_vs_projection(vis_ds.column(score.feature), proj,
                                                       score.feature, name),
                         adir, f"scatter_{score.feature}")
        write_figure(bin_sample_table(binning, V.ids, cfg.sample_size, cfg.sample_seed),
                     adir, "bin_samples")

    ranked = rank_anchors(anchors, [projections[a.name] for a in anchors], S, cfg.alpha, grid)
    rows = [[str(i + 1), r.anchor.name,
             "beyond max time" if r.median is BeyondMaxTime else f"{r.median:.4g}",
             str(int(r.top_rows.size))] for i, r in enumerate(ranked)]
    write_figure({"kind": "table", "schema_version": 1, "variant": "anchor_ranking",
                  "title": f"anchors by median survival of top {cfg.alpha:g} projections",
                  "header": ["rank", "anchor", "median", "rows"], "rows": rows,
                  "ranking": [r.to_json() for r in ranked]}, out, "anchor_ranking")

    groups = [f"cluster{z + 1}" for z in fit.predict(V.embeddings)]
    present = [f"cluster{j + 1}" for j in range(k) if f"cluster{j + 1}" in set(groups)]
    write_figure(average_projection_heatmap(groups, projections, present,
                                            "mean projection by assigned cluster"),
                 out, "average_projection_heatmap")
    write_figure(pca_scatter(V, _row_medians(S, grid), "median survival"), out, "pca")

    report = {"k": k, "k_source": k_source, "anchors": [a.name for a in anchors],
              "anchor_order": [r.anchor.name for r in ranked],
              "medians": {r.anchor.name: median_to_json(r.median) for r in ranked}, **report_info}
    dump_json(report, os.path.join(out, "run_report.json"))
    _record_run(cfg, "analyze", k=k, k_source=k_source)
    for w in report_info["warnings"]:
        log.warning(w)
    return report


def cmd_render(cfg: RunConfig) -> list[str]:
    if not os.path.isdir(cfg.out_dir):
        raise ConfigError(f"output directory {cfg.out_dir!r} does not exist")
    return render_directory(cfg.out_dir)


# --- entry point ------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="survanchor", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("synth", "generate a synthetic dataset"),
                            ("train", "fit the survival network and export embeddings"),
                            ("analyze", "cluster, build anchors, and emit figures and tables"),
                            ("render", "re-render SVGs from the JSON figure data")):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="INI configuration file")
        sp.add_argument("--seed", type=int, help="override every stage seed")
        sp.add_argument("--out", help="output directory")
        if name == "analyze":
            sp.add_argument("--concept", action="append", help="concept filter column=value (repeatable)")
            sp.add_argument("--k", type=int, help="number of clusters (skips the knee rule)")
            sp.add_argument("--bins", type=int, help="number of projection bins")
            sp.add_argument("--test", choices=TESTS, help="feature association test")
            sp.add_argument("--fdr-q", type=float, dest="fdr_q", help="Benjamini-Yekutieli target rate")
    return parser


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "analyze": cmd_analyze, "render": cmd_render}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, args)
        os.makedirs(cfg.out_dir, exist_ok=True)
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, SurvAnchorError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
