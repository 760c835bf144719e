import json

import numpy as np
import pytest

from mristage.cli import main
from mristage.data import load_dataset, write_dataset

from _helpers import FIXTURES, make_dataset

GAUSS3 = str(FIXTURES / "gauss3" / "manifest.json")


def _fast_config(tmp_path, **extra):
    cfg = {"search": {"budget": 3, "patience": 2}}
    cfg.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_evaluate_loo_happy_path(tmp_path, capsys):
    out = tmp_path / "run"
    code = main([
        "evaluate", "--protocol", "loo", "--manifest", GAUSS3,
        "--seed", "7", "--out", str(out), "--config", _fast_config(tmp_path),
    ])
    assert code == 0
    assert (out / "report.json").is_file()
    assert (out / "report.txt").is_file()
    doc = json.loads((out / "report.json").read_text())
    assert doc["protocol"]["name"] == "loo"
    assert len(doc["units"]) == 60
    table = (out / "report.txt").read_text()
    assert "Average" in table and "%" in table


def test_unknown_flag_is_usage_error(tmp_path, capsys):
    code = main(["evaluate", "--bogus"])
    assert code == 1
    err = capsys.readouterr().err
    assert "usage" in err and err.count("\n") == 1


def test_unknown_subcommand_is_usage_error(capsys):
    assert main(["frobnicate"]) == 1


def test_out_of_schema_label_exits_2(tmp_path, capsys):
    manifest = json.loads((FIXTURES / "gauss3" / "manifest.json").read_text())
    manifest["records"][3]["label"] = "stage9"
    bad_dir = tmp_path / "bad"
    bad_dir.mkdir()
    (bad_dir / "manifest.json").write_text(json.dumps(manifest))
    payload = (FIXTURES / "gauss3" / "gauss3.f32").read_bytes()
    (bad_dir / "gauss3.f32").write_bytes(payload)
    code = main([
        "evaluate", "--protocol", "loo", "--manifest", str(bad_dir / "manifest.json"),
        "--out", str(tmp_path / "o"),
    ])
    assert code == 2
    err = capsys.readouterr().err
    assert "stage9" in err and "g003" in err and err.count("\n") == 1


def test_ingest_train_predict_round_trip(tmp_path, capsys):
    rng = np.random.default_rng(60)
    lines = ["id,label,sex,age,f0,f1"]
    for i in range(10):
        x = rng.normal((0, 4) if i < 5 else (4, 0), 0.3)
        lines.append(f"s{i},{'north' if i < 5 else 'south'},{'F' if i % 2 else 'M'},{60 + i},{x[0]:.6f},{x[1]:.6f}")
    csv_in = tmp_path / "table.csv"
    csv_in.write_text("\n".join(lines) + "\n")

    manifest = tmp_path / "table" / "manifest.json"
    assert main(["ingest", "--csv", str(csv_in), "--out-manifest", str(manifest)]) == 0
    ds = load_dataset(manifest)
    assert len(ds) == 10 and ds.schema == ("north", "south")

    bundle = tmp_path / "bundle"
    cfg = _fast_config(tmp_path, hyperparams={"C": 10.0, "gamma": 1.0})
    assert main(["train", "--manifest", str(manifest), "--out", str(bundle),
                 "--config", cfg, "--seed", "1"]) == 0
    assert (bundle / "index.json").is_file()

    capsys.readouterr()
    assert main(["predict", "--bundle", str(bundle), "--manifest", str(manifest)]) == 0
    out_lines = capsys.readouterr().out.strip().splitlines()
    assert out_lines[0] == "id,predicted_label,decision_north,decision_south"
    assert len(out_lines) == 11
    for i, line in enumerate(out_lines[1:]):
        cells = line.split(",")
        assert cells[0] == f"s{i}"
        assert cells[1] == ("north" if i < 5 else "south")
        assert len(cells) == 4


def test_predict_empty_manifest(tmp_path, capsys, gauss3):
    bundle = tmp_path / "bundle"
    cfg = _fast_config(tmp_path, hyperparams={"C": 10.0, "gamma": 1.0})
    assert main(["train", "--manifest", GAUSS3, "--out", str(bundle),
                 "--config", cfg]) == 0
    empty = make_dataset(np.empty((0, 2)), [], gauss3.schema)
    empty_manifest = tmp_path / "empty" / "manifest.json"
    write_dataset(empty, empty_manifest)
    capsys.readouterr()
    assert main(["predict", "--bundle", str(bundle), "--manifest", str(empty_manifest)]) == 0
    out = capsys.readouterr().out
    assert out == "id,predicted_label,decision_stage0,decision_stage1,decision_stage2\n"


def test_predict_dimension_mismatch_exits_2(tmp_path, capsys):
    bundle = tmp_path / "bundle"
    cfg = _fast_config(tmp_path, hyperparams={"C": 10.0, "gamma": 1.0})
    assert main(["train", "--manifest", GAUSS3, "--out", str(bundle), "--config", cfg]) == 0
    wide = make_dataset(np.zeros((2, 5)), ["stage0", "stage1"],
                        ["stage0", "stage1", "stage2"])
    wide_manifest = tmp_path / "wide" / "manifest.json"
    write_dataset(wide, wide_manifest)
    code = main(["predict", "--bundle", str(bundle), "--manifest", str(wide_manifest)])
    assert code == 2
    assert "dimension" in capsys.readouterr().err


def test_evaluate_reproducible_and_jobs_invariant(tmp_path):
    cfg = _fast_config(tmp_path)
    outs = []
    for name, jobs in (("a", "1"), ("b", "1"), ("c", "4")):
        out = tmp_path / name
        assert main([
            "evaluate", "--protocol", "loo", "--manifest", GAUSS3,
            "--seed", "11", "--out", str(out), "--config", cfg, "--jobs", jobs,
        ]) == 0
        outs.append((out / "report.json").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_evaluate_holdout_defaults_from_flags(tmp_path):
    out = tmp_path / "h"
    assert main([
        "evaluate", "--protocol", "holdout", "--repetitions", "2",
        "--train-fraction", "0.8", "--manifest", GAUSS3,
        "--seed", "3", "--out", str(out), "--config", _fast_config(tmp_path),
    ]) == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["protocol"] == {"name": "holdout", "repetitions": 2, "train_fraction": 0.8}
    assert len(doc["units"]) == 2
    assert all(len(u["predictions"]) == 12 for u in doc["units"])


def test_flags_override_config(tmp_path):
    cfg = _fast_config(tmp_path, seed=1)
    out = tmp_path / "o"
    assert main([
        "evaluate", "--protocol", "loo", "--manifest", GAUSS3,
        "--seed", "2", "--out", str(out), "--config", cfg,
    ]) == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["seed"] == 2


def test_learning_curve_cli(tmp_path):
    out = tmp_path / "curve"
    assert main([
        "learning-curve", "--manifest", GAUSS3, "--seed", "5",
        "--out", str(out), "--config", _fast_config(tmp_path),
        "--fractions", "0.2:0.6:0.2",
    ]) == 0
    lines = (out / "curve.csv").read_text().strip().splitlines()
    assert lines[0] == "fraction,train_accuracy,test_accuracy"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["0.2", "0.4", "0.6"]
    doc = json.loads((out / "report.json").read_text())
    assert [p["fraction"] for p in doc["curve"]] == [0.2, 0.4, 0.6]


def test_missing_manifest_is_usage_error(tmp_path, capsys):
    assert main(["evaluate", "--protocol", "loo", "--out", str(tmp_path / "x")]) == 1


def test_run_log_contains_timestamp_but_report_does_not(tmp_path):
    out = tmp_path / "r"
    assert main([
        "evaluate", "--protocol", "loo", "--manifest", GAUSS3,
        "--seed", "1", "--out", str(out), "--config", _fast_config(tmp_path),
    ]) == 0
    assert (out / "run.log").is_file()
    assert "mristage" in (out / "run.log").read_text()
