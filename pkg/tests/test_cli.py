import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from csvm.cli import main
from csvm.classifier import load_model
from csvm.data import Dataset, Domain, load_libsvm, write_libsvm


def _write(path, X, y, domain):
    write_libsvm(Dataset.from_raw(X, np.asarray(y), domain), path)
    return str(path)


@pytest.fixture
def files(tmp_path):
    """Separable three-class toy problem with a small target shift."""
    rng = np.random.default_rng(4)
    centers = np.array([[0.0, 4.0], [3.5, -2.0], [-3.5, -2.0]])
    ys, yt = np.repeat([3, 5, 9], 10), np.repeat([3, 5, 9], 3)
    lab = {3: 0, 5: 1, 9: 2}
    Xs = centers[[lab[v] for v in ys]] + 0.4 * rng.normal(size=(30, 2))
    Xt = centers[[lab[v] for v in yt]] + 0.5 + 0.4 * rng.normal(size=(9, 2))
    return {"source": _write(tmp_path / "s.libsvm", Xs, ys, 0),
            "target": _write(tmp_path / "t.libsvm", Xt, yt, 1),
            "dir": tmp_path}


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _train(capsys, files, *extra):
    model = files["dir"] / "m.json"
    code, out, err = run(capsys, "train", "--source", files["source"], "--target",
                         files["target"], "--out", model, *extra)
    return code, out, err, model


def test_train_happy_path(capsys, files):
    code, out, _, model = _train(capsys, files, "--lambda", 1, "--cs", 1, "--ct", 10)
    assert code == 0 and model.exists()
    doc = json.loads(out)
    assert doc["hyperparams"]["c_target"] == 10.0
    assert len(doc["binaries"]) == 3
    for b in doc["binaries"]:
        assert {"duality_gap", "coupling_distance", "n_support_source"} <= set(b)


@pytest.mark.parametrize("flag", ["--lambda", "--cs", "--ct"])
def test_negative_hyperparameter_is_usage_error(capsys, files, flag):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--source", files["source"], "--target", files["target"],
              "--out", str(files["dir"] / "m.json"), flag, "-1"])
    assert exc.value.code == 2
    assert flag in capsys.readouterr().err


def test_lambda_flag_exit_code_subprocess(files):
    proc = subprocess.run(
        [sys.executable, "-m", "csvm.cli", "train", "--source", files["source"], "--target",
         files["target"], "--out", str(files["dir"] / "m.json"), "--lambda", "-1"],
        capture_output=True, text=True)
    assert proc.returncode == 2
    assert "--lambda" in proc.stderr and proc.stdout == ""


def test_train_with_cv_writes_table(capsys, files):
    grid = files["dir"] / "grid.json"
    grid.write_text(json.dumps({"lambdas": [0, 10], "c_sources": [1], "c_targets": [1]}))
    code, out, err, model = _train(capsys, files, "--cv", "--grid", grid)
    assert code == 0
    doc = json.loads(out)
    table = files["dir"] / "m.cv.csv"
    rows = list(csv.DictReader(table.open()))
    assert len(rows) == 2 and set(rows[0]) == {"lambda", "c_source", "c_target", "loo_accuracy"}
    assert load_model(model).hyper.lam == doc["cv"]["best"]["lam"]
    assert "cv grid points: 2/2" in err


def test_predict_recalls_separable_training_set(capsys, files):
    _train(capsys, files, "--lambda", 1, "--ct", 10, "--standardize")
    preds = files["dir"] / "p.csv"
    code, _, _ = run(capsys, "predict", "--model", files["dir"] / "m.json",
                     "--input", files["target"], "--out", preds)
    assert code == 0
    rows = list(csv.DictReader(preds.open()))
    truth = load_libsvm(files["target"], Domain.TARGET).raw_labels()
    assert [int(r["label"]) for r in rows] == truth.tolist()
    assert set(rows[0]) == {"row", "label", "score_0", "score_1", "score_2"}
    code, out, _ = run(capsys, "eval", "--model", files["dir"] / "m.json", "--test",
                       files["target"])
    assert json.loads(out)["accuracy"] == 1.0


def test_boundaries_differ_when_decoupled(capsys, tmp_path):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 2))
    src = _write(tmp_path / "s.libsvm", X, np.where(X[:, 0] > 0, 1, 2), 0)
    tgt = _write(tmp_path / "t.libsvm", X + 0.01, np.where(X[:, 1] > 0, 1, 2), 1)
    run(capsys, "train", "--source", src, "--target", tgt, "--lambda", 0, "--cs", 10,
        "--ct", 10, "--out", tmp_path / "m.json")
    outs = {}
    for side in ("source", "target"):
        code, outs[side], _ = run(capsys, "predict", "--model", tmp_path / "m.json",
                                  "--input", tgt, "--boundary", side)
        assert code == 0
    assert outs["source"] != outs["target"]


def test_predict_empty_input(capsys, files):
    _train(capsys, files)
    empty = files["dir"] / "empty.libsvm"
    empty.write_text("")
    out_path = files["dir"] / "p.csv"
    code, out, _ = run(capsys, "predict", "--model", files["dir"] / "m.json", "--input", empty,
                       "--out", out_path)
    assert code == 0 and out_path.read_text() == "" and out == ""


def test_predict_dimension_mismatch(capsys, files):
    _train(capsys, files)
    wide = files["dir"] / "wide.csv"
    wide.write_text("1,2,3\n4,5,6\n")
    code, _, err = run(capsys, "predict", "--model", files["dir"] / "m.json", "--input", wide)
    assert code == 2 and "features" in err


def test_predict_csv_input(capsys, files):
    _train(capsys, files)
    feats = files["dir"] / "x.csv"
    feats.write_text("0,4\n3.5,-2\n")
    code, out, _ = run(capsys, "predict", "--model", files["dir"] / "m.json", "--input", feats)
    rows = list(csv.DictReader(out.splitlines()))
    assert code == 0 and [r["label"] for r in rows] == ["3", "5"]


def test_missing_file_is_usage_error(capsys, files):
    code, _, err = run(capsys, "train", "--source", "nope.libsvm", "--target",
                       files["target"], "--out", files["dir"] / "m.json")
    assert code == 2 and "nope.libsvm" in err


def test_single_class_is_runtime_error(capsys, tmp_path):
    X = np.arange(8.0).reshape(4, 2)
    src = _write(tmp_path / "s.libsvm", X, np.ones(4, int), 0)
    tgt = _write(tmp_path / "t.libsvm", X, np.ones(4, int), 1)
    code, _, err = run(capsys, "train", "--source", src, "--target", tgt,
                       "--out", tmp_path / "m.json")
    assert code == 1 and "error" in err


def test_cv_subcommand(capsys, files):
    grid = files["dir"] / "grid.json"
    grid.write_text(json.dumps({"grid": {"lambdas": [0, 1], "c_sources": [1],
                                         "c_targets": [1, 10]}}))
    table = files["dir"] / "cv.csv"
    code, out, _ = run(capsys, "cv", "--source", files["source"], "--target", files["target"],
                       "--grid", grid, "--out", table)
    doc = json.loads(out)
    assert code == 0 and doc["fold_count"] == 9
    assert len(table.read_text().splitlines()) == 5


def test_bad_grid_file(capsys, files):
    grid = files["dir"] / "grid.json"
    grid.write_text("{not json")
    code, _, err = run(capsys, "cv", "--source", files["source"], "--target", files["target"],
                       "--grid", grid, "--out", files["dir"] / "cv.csv")
    assert code == 2 and "--grid" in err


def _config(tmp_path, **over):
    doc = {"data": {"synthetic": {"means": [[0, 2], [1.7, -1], [-1.7, -1]],
                                  "covariances": 0.5, "rotation_deg": 30,
                                  "n_source_per_class": 30, "n_target_per_class": 30}},
           "n_source_per_class": 5, "n_target_per_class": 2, "n_splits": 2,
           "grid": {"lambdas": [0, 1], "c_sources": [1], "c_targets": [1]},
           "solver": {"tol": 1e-4, "max_epochs": 200}}
    doc.update(over)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


def test_experiment_subcommand_deterministic(capsys, tmp_path):
    cfg = _config(tmp_path)
    texts = []
    for name in ("a", "b"):
        code, out, err = run(capsys, "experiment", "--config", cfg, "--out-dir", tmp_path / name,
                             "--threads", 1)
        assert code == 0 and "splits: 2/2" in err
        assert set(json.loads(out)["methods"]) == {"SVM_T", "SVM_S", "SVM_ST", "CSVM"}
        texts.append((tmp_path / name / "report.json").read_bytes())
    assert texts[0] == texts[1]
    assert (tmp_path / "a" / "splits.csv").exists()


def test_sweep_subcommand(capsys, tmp_path):
    cfg = _config(tmp_path, methods=["SVM_T", "CSVM"])
    out_csv = tmp_path / "curves.csv"
    code, out, err = run(capsys, "sweep", "--config", cfg, "--axis", "target_count",
                         "--values", "1,2,99", "--out", out_csv, "--threads", 1)
    assert code == 0
    rows = list(csv.DictReader(out_csv.open()))
    assert [(r["count"], r["method"]) for r in rows] == [
        ("1", "SVM_T"), ("1", "CSVM"), ("2", "SVM_T"), ("2", "CSVM")]
    assert "target_count=99 skipped" in err and json.loads(out)["points"] == 4


def test_sweep_needs_axis(capsys, tmp_path):
    code, _, err = run(capsys, "sweep", "--config", _config(tmp_path), "--out", tmp_path / "c.csv")
    assert code == 2 and "--axis" in err


def test_bad_config_is_usage_error(capsys, tmp_path):
    code, _, err = run(capsys, "experiment", "--config", _config(tmp_path, n_splits=0),
                       "--out-dir", tmp_path / "o")
    assert code == 2 and "n_splits" in err


def test_gen_is_seeded(capsys, tmp_path):
    cfg = _config(tmp_path)
    outs = []
    for tag in ("a", "b"):
        s, t = tmp_path / f"s{tag}.libsvm", tmp_path / f"t{tag}.libsvm"
        code, out, _ = run(capsys, "gen", "--config", cfg, "--source-out", s, "--target-out", t)
        assert code == 0 and json.loads(out)["n_target"] == 90
        outs.append((s.read_text(), t.read_text()))
    assert outs[0] == outs[1]
    assert len(load_libsvm(tmp_path / "sa.libsvm", Domain.SOURCE)) == 90


def test_gen_csv_format(capsys, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"means": [[0, 0], [3, 3]], "n_source_per_class": 4,
                                "n_target_per_class": 2, "rotation_deg": 10}))
    code, _, _ = run(capsys, "gen", "--spec", spec, "--seed", 5, "--format", "csv",
                     "--source-out", tmp_path / "s.csv", "--target-out", tmp_path / "t.csv")
    assert code == 0
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert len(lines) == 4 and len(lines[0].split(",")) == 3
