import csv
import hashlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from tsxbench.catalog import load_catalog
from tsxbench.cli import DEFAULTS, main
from tsxbench.explainers import Attribution, explain_batch, save_attribution
from tsxbench.nn.checkpoint import load_model
from tsxbench.report import read_records

SMALL = ["--types", "Univariate_Gaussian_Middle,Univariate_Gaussian_MovingMiddle",
         "--n-train", "40", "--n-test", "6", "--workers", "1"]


def _tree_digest(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.name != "run_manifest.json":
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


@pytest.fixture
def home(tmp_path):
    return tmp_path / "home"


@pytest.fixture
def gate_off(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("accuracy_gate: 0.0\nfaithfulness:\n  n_runs: 10\n")
    return str(path)


@pytest.fixture
def trained(home):
    assert main(["generate", "--home", str(home), *SMALL]) == 0
    assert main(["train", "--home", str(home), "--max-epochs", "3", "--workers", "1"]) == 0
    return home


def test_generate_respects_filters_and_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["generate", "--out", str(a), *SMALL]) == 0
    assert main(["generate", "--out", str(b), *SMALL]) == 0
    assert sorted(p.name for p in a.iterdir() if p.is_dir()) == [
        "Univariate_Gaussian_Middle", "Univariate_Gaussian_MovingMiddle"]
    assert _tree_digest(a) == _tree_digest(b)


def test_generate_rare_only(tmp_path):
    out = tmp_path / "rare"
    assert main(["generate", "--out", str(out), "--types", "Rare", "--n-train", "4", "--n-test", "2"]) == 0
    names = [ds.name for ds in load_catalog(out)]
    assert len(names) == 48 and all("Rare" in n for n in names)


def test_generate_exit_codes(tmp_path):
    out = tmp_path / "c"
    assert main(["generate", "--out", str(out), *SMALL]) == 0
    assert main(["generate", "--out", str(out), *SMALL]) == 4
    assert main(["generate", "--out", str(out), *SMALL, "--force"]) == 0
    assert main(["generate", "--out", str(tmp_path / "d"), "--types", "NoSuchThing"]) == 3
    assert main(["generate", "--out", str(tmp_path / "e"), "--models", "transformer"]) == 2
    assert main(["generate", "--config", str(tmp_path / "missing.yaml")]) == 2


def test_force_keeps_unrelated_files(tmp_path):
    out = tmp_path / "c"
    out.mkdir()
    (out / "notes.txt").write_text("keep")
    assert main(["generate", "--out", str(out), *SMALL, "--force"]) == 0
    assert (out / "notes.txt").read_text() == "keep"


def test_env_home_is_default(home):
    assert main(["generate", *SMALL]) == 0
    assert (home / "catalog" / "catalog.json").exists()


def test_train_writes_accuracy_and_resumes(trained):
    rows = list(csv.DictReader(open(trained / "models" / "accuracy.csv")))
    assert [r["dataset"] for r in rows] == ["Univariate_Gaussian_Middle", "Univariate_Gaussian_MovingMiddle"]
    assert list(rows[0]) == ["dataset", "architecture", "train_acc", "test_acc", "epochs_run"]
    ckpt = trained / "models" / "Univariate_Gaussian_Middle" / "TemporalConv" / "params.bin"
    before = ckpt.stat().st_mtime_ns
    assert main(["train", "--home", str(trained), "--max-epochs", "3", "--workers", "1"]) == 0
    assert ckpt.stat().st_mtime_ns == before
    assert list(csv.DictReader(open(trained / "models" / "accuracy.csv"))) == rows


def test_train_without_catalog(home):
    assert main(["train", "--home", str(home)]) == 4


def test_evaluate_filters_and_report(trained, gate_off):
    out = trained / "eval"
    argv = ["evaluate", "--home", str(trained), "--config", gate_off, "--out", str(out),
            "--explainers", "saliency,occlusion", "--metrics", "complexity,racc", "--max-instances", "2"]
    assert main(argv) == 0
    records = read_records(out / "records.csv")
    assert {r.explainer for r in records} == {"saliency", "occlusion"}
    assert {r.metric for r in records} == {"complexity", "racc"}
    assert len(records) == 2 * 2 * 2 * 2
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["config"]["accuracy_gate"] == 0.0 and "versions" in manifest
    rep = trained / "rep"
    assert main(["report", "--records", str(out / "records.csv"), "--out", str(rep),
                 "--group-by", "dataset,metric"]) == 0
    assert (rep / "stats.csv").read_text().splitlines()[1].startswith("Univariate_Gaussian_Middle/complexity")
    assert main(["report", "--records", str(trained / "nope.csv"), "--out", str(rep)]) == 4


def test_evaluate_missing_checkpoint_with_robustness(home):
    assert main(["generate", "--home", str(home), *SMALL]) == 0
    assert main(["evaluate", "--home", str(home), "--metrics", "sens_max", "--models", "lstm"]) == 2


def test_evaluate_gate_empty(trained):
    cfg = trained / "strict.yaml"
    cfg.write_text("accuracy_gate: 1.0\n")
    assert main(["evaluate", "--home", str(trained), "--config", str(cfg), "--metrics", "complexity",
                 "--explainers", "saliency"]) == 3


def test_external_attributions_match_internal(trained, gate_off):
    metrics = "complexity,racc,macc,faithfulness"
    internal = trained / "internal"
    assert main(["evaluate", "--home", str(trained), "--config", gate_off, "--out", str(internal),
                 "--explainers", "saliency", "--metrics", metrics, "--max-instances", "3"]) == 0
    ext_dir = trained / "attrs"
    for ds in load_catalog(trained / "catalog"):
        model = load_model(trained / "models" / ds.name / "TemporalConv")
        for i in range(3):
            scores = explain_batch("saliency", model, ds.x_test[i])
            fmt = "csv" if i % 2 else "json"
            save_attribution(Attribution(scores, 0, "saliency"), ext_dir / ds.name / f"a{i}.{fmt}", fmt, instance=i)
    external = trained / "external"
    assert main(["evaluate", "--home", str(trained), "--config", gate_off, "--out", str(external),
                 "--attributions", str(ext_dir), "--metrics", metrics]) == 0
    a = [(r.dataset, r.instance, r.metric, r.value) for r in read_records(internal / "records.csv")]
    b = [(r.dataset, r.instance, r.metric, r.value) for r in read_records(external / "records.csv")]
    assert a == b
    assert main(["evaluate", "--home", str(trained), "--out", str(trained / "x"),
                 "--attributions", str(ext_dir), "--metrics", "sens_mean"]) == 2


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_train": 4, "n_test": 2, "types": ["Univariate_Harmonic_Middle"]}))
    out = tmp_path / "o"
    assert main(["generate", "--config", str(cfg), "--out", str(out), "--n-test", "3"]) == 0
    (ds,) = load_catalog(out)
    assert len(ds.x_train) == 4 and len(ds.x_test) == 3
    bad = tmp_path / "bad.yaml"
    bad.write_text("no_such_key: 1\n")
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path / "p")]) == 2


def test_defaults_cover_every_flag():
    assert {"seed", "types", "models", "explainers", "metrics", "workers", "out", "force"} <= set(DEFAULTS)


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "tsxbench", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("generate", "train", "evaluate", "report"):
        assert cmd in res.stdout
