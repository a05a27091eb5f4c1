import csv
import json
import os
from pathlib import Path

import numpy as np
import pytest

from survanchor.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, load_config, build_parser, main
from survanchor.data import SyntheticSpec, generate_synthetic

ROOT = Path(__file__).resolve().parents[1]
SYNTH_INI = ROOT / "configs" / "synthetic.ini"


def tree(d):
    return {str(p.relative_to(d)): p.read_bytes() for p in sorted(Path(d).rglob("*")) if p.is_file()}


def run_all(out, *extra, config=SYNTH_INI):
    for stage in ("synth", "train", "analyze"):
        args = [stage, "--config", str(config), "--out", str(out)]
        if stage == "analyze":
            args += list(extra)
        assert main(args) == EXIT_OK, stage


@pytest.fixture(scope="module")
def synthetic_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("synthetic")
    run_all(out)
    return out


def test_synth_outputs(tmp_path):
    assert main(["synth", "--config", str(SYNTH_INI), "--out", str(tmp_path)]) == EXIT_OK
    with open(tmp_path / "data" / "dataset.csv") as fh:
        assert sum(1 for _ in fh) == 2000 + 1
    first = tree(tmp_path)
    assert main(["synth", "--config", str(SYNTH_INI), "--out", str(tmp_path)]) == EXIT_OK
    assert tree(tmp_path) == first


def test_four_group_outputs(synthetic_run):
    a = synthetic_run / "analysis"
    report = json.loads((a / "run_report.json").read_text())
    assert report["k"] == 4 and report["k_source"] == "rule"
    assert report["anchors"] == ["cluster1", "cluster2", "cluster3", "cluster4"]
    assert len(list(a.glob("cluster*/survival_heatmap.svg"))) == 4
    violin = json.loads((a / "violin.json").read_text())
    assert [v["k"] for v in violin["violins"]] == list(range(2, 9))
    assert report["heatmap_violations"] == {}
    for name in ("k_selection.json", "mixture.json", "anchors.json", "anchor_ranking.svg",
                 "average_projection_heatmap.svg", "pca.svg"):
        assert (a / name).exists(), name
    for d in a.glob("cluster*"):
        for name in ("projections.json", "raw_feature_heatmap.json", "feature_ranking.csv",
                     "bin_samples.json"):
            assert (d / name).exists()


def test_bundles_align_with_splits(synthetic_run):
    with open(synthetic_run / "data" / "splits.csv") as fh:
        roles = {r["id"]: r["role"] for r in csv.DictReader(fh)}
    for role, name in (("anchor", "anchor.json"), ("visualization", "visualization.json")):
        bundle = json.loads((synthetic_run / "bundles" / name).read_text())
        assert {roles[i] for i in bundle["ids"]} == {role}
        assert bundle["n"] == sum(1 for v in roles.values() if v == role)


def test_run_record(synthetic_run):
    run = json.loads((synthetic_run / "run.json").read_text())
    assert set(run["stages"]) == {"synth", "train", "analyze"}
    hashes = {s["config_hash"] for s in run["stages"].values()}
    assert len(hashes) == 1
    assert run["stages"]["train"]["seeds"]["train"] == 0
    assert "numpy" in run["stages"]["analyze"]["versions"]


def test_rerun_is_byte_identical(synthetic_run, tmp_path):
    run_all(tmp_path)
    assert tree(tmp_path) == tree(synthetic_run)
    assert main(["render", "--config", str(SYNTH_INI), "--out", str(tmp_path)]) == EXIT_OK
    assert tree(tmp_path) == tree(synthetic_run)


def test_analyze_reads_only_bundles_and_role_files(synthetic_run, tmp_path):
    # copy the run without the raw dataset, splits and labels; analyze must still work
    for rel, blob in tree(synthetic_run).items():
        if rel.startswith("analysis") or rel in ("data/dataset.csv", "data/true_labels.csv", "data/splits.csv"):
            continue
        dest = tmp_path / rel
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_bytes(blob)
    assert main(["analyze", "--config", str(SYNTH_INI), "--out", str(tmp_path)]) == EXIT_OK
    a, b = tree(tmp_path / "analysis"), tree(synthetic_run / "analysis")
    assert a == b


def test_flags_override(synthetic_run, tmp_path):
    for rel, blob in tree(synthetic_run).items():
        if not rel.startswith("analysis"):
            (tmp_path / rel).parent.mkdir(parents=True, exist_ok=True)
            (tmp_path / rel).write_bytes(blob)
    assert main(["analyze", "--config", str(SYNTH_INI), "--out", str(tmp_path), "--k", "3",
                 "--bins", "5", "--test", "kruskal", "--fdr-q", "0.05"]) == EXIT_OK
    report = json.loads((tmp_path / "analysis" / "run_report.json").read_text())
    assert report["k"] == 3 and report["k_source"] == "flag"
    proj = json.loads((tmp_path / "analysis" / "cluster1" / "projections.json").read_text())
    assert len(proj["binning"]["midpoints"]) == 5
    ranking = json.loads((tmp_path / "analysis" / "cluster1" / "feature_ranking.json").read_text())
    assert ranking["test"] == "kruskal" and ranking["fdr"]["q"] == 0.05


# --- csv source with a concept filter ---------------------------------------------------------

CSV_INI = """
[run]
seed = 1
[data]
source = csv
path = ${CSV_PATH}
id_col = pid
time_col = days
event_col = died
[train]
batch_sizes = 64
learning_rates = 0.01
layer_counts = 1
embedding_dims = 4
max_epochs = 15
[cluster]
k_min = 2
k_max = 4
n_init = 2
[anchors]
concepts = flag=1
[feature.x0]
kind = continuous
[feature.x1]
kind = continuous
[feature.flag]
kind = indicator
[feature.group]
kind = categorical
"""


def write_csv_source(path, n=600):
    ds, labels = generate_synthetic(SyntheticSpec(means=(2.0, 6.0), n_samples=n, dim=2, seed=1))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pid", "x0", "x1", "flag", "group", "days", "died"])
        for i in range(n):
            w.writerow([f"p{i}", *ds.features[i], int(labels[i]), "ab"[i % 2], ds.time[i], ds.event[i]])


@pytest.fixture
def csv_setup(tmp_path, monkeypatch):
    write_csv_source(tmp_path / "src.csv")
    monkeypatch.setenv("CSV_PATH", str(tmp_path / "src.csv"))
    ini = tmp_path / "csv.ini"
    ini.write_text(CSV_INI)
    return tmp_path, ini


def test_csv_run_with_concepts(csv_setup):
    tmp_path, ini = csv_setup
    out = tmp_path / "out"
    assert main(["train", "--config", str(ini), "--out", str(out)]) == EXIT_OK
    assert main(["analyze", "--config", str(ini), "--out", str(out), "--k", "2",
                 "--concept", "group=b"]) == EXIT_OK
    report = json.loads((out / "analysis" / "run_report.json").read_text())
    assert report["anchors"] == ["cluster1", "cluster2", "concept:flag=1", "concept:group=b"]
    assert (out / "analysis" / "concept_flag-1" / "raw_feature_heatmap.svg").exists()
    heat = json.loads((out / "analysis" / "concept_flag-1" / "raw_feature_heatmap.json").read_text())
    assert "1 - flag" in heat["row_labels"] and "group: a" in heat["row_labels"]


def test_csv_bad_event_flag_exits_data_error(csv_setup):
    tmp_path, ini = csv_setup
    text = (tmp_path / "src.csv").read_text().splitlines()
    cells = text[5].split(",")
    cells[-1] = "2"
    text[5] = ",".join(cells)
    (tmp_path / "src.csv").write_text("\n".join(text) + "\n")
    assert main(["train", "--config", str(ini), "--out", str(tmp_path / "o")]) == EXIT_DATA


def test_csv_missing_env_var(tmp_path, monkeypatch):
    monkeypatch.delenv("CSV_PATH", raising=False)
    ini = tmp_path / "csv.ini"
    ini.write_text(CSV_INI)
    assert main(["train", "--config", str(ini), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


# --- configuration errors ---------------------------------------------------------------------

def test_missing_config_file(tmp_path):
    assert main(["synth", "--config", str(tmp_path / "nope.ini")]) == EXIT_CONFIG


@pytest.mark.parametrize("body", [
    "[cluster]\nkind = kmeans\n",
    "[anchors]\nbins = zero\n",
    "[anchors]\nalpha = 1.5\n",
    "[assoc]\ntest = anova\n",
    "[data]\nsource = parquet\n",
    "[cluster]\nk_min = 5\nk_max = 3\n",
])
def test_bad_config_values(tmp_path, body):
    ini = tmp_path / "bad.ini"
    ini.write_text(body)
    assert main(["synth", "--config", str(ini), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_analyze_before_train(tmp_path):
    assert main(["analyze", "--config", str(SYNTH_INI), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_seed_flag_overrides_every_stage():
    args = build_parser().parse_args(["train", "--config", str(SYNTH_INI), "--seed", "9"])
    cfg = load_config(args.config, args)
    assert {cfg.seed, cfg.split_seed, cfg.train.seed, cfg.cluster_seed, cfg.sample_seed,
            cfg.synthetic.seed} == {9}
    args = build_parser().parse_args(["train", "--config", str(SYNTH_INI)])
    assert load_config(args.config, args).config_hash() != cfg.config_hash()
