import json

import numpy as np
import pytest

from igcl.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_OK, main
from igcl.evaluation import confusion_counts
from igcl.plotting import label_runs
from igcl.scoring import read_scores_csv
from igcl.series import future_anomaly_targets, load_series_csv

SPEC = {"n_vars": 3, "train_length": 600, "test_length": 500,
        "random_events": {"n_events": 3, "precursor_length": 8, "anomaly_length": 6, "margin": 50}}
RUN = {"h": 4, "b": 12, "f": 4, "bank_size": 2, "d": 8, "kernels": [2], "diffusion_steps": 3, "epochs": 1,
       "steps_per_epoch": 4}


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "spec.json").write_text(json.dumps(SPEC))
    (root / "run.json").write_text(json.dumps(RUN))
    assert main(["synth", "--spec", str(root / "spec.json"), "--out", str(root / "bench"), "--seed", "2"]) == EXIT_OK
    assert main(["train", "--data", str(root / "bench/train.csv"), "--config", str(root / "run.json"),
                 "--out", str(root / "m.ckpt")]) == EXIT_OK
    assert main(["score", "--model", str(root / "m.ckpt"), "--data", str(root / "bench/test.csv"),
                 "--out", str(root / "scores.csv")]) == EXIT_OK
    return root


def test_synth_is_deterministic(pipeline, tmp_path):
    main(["synth", "--spec", str(pipeline / "spec.json"), "--out", str(tmp_path), "--seed", "2"])
    for name in ("train.csv", "test.csv", "provenance.json"):
        assert (tmp_path / name).read_bytes() == (pipeline / "bench" / name).read_bytes()


def test_synth_bad_spec_names_field(tmp_path, capsys):
    bad = {"events": [{"onset": 50, "precursor_length": 10, "anomaly_length": 3, "variables": [0], "kind": "zig"}]}
    (tmp_path / "s.json").write_text(json.dumps(bad))
    assert main(["synth", "--spec", str(tmp_path / "s.json"), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "kind" in capsys.readouterr().err


def test_score_header_and_columns(pipeline):
    lines = (pipeline / "scores.csv").read_text().splitlines()
    assert lines[0].startswith("# delta=")
    assert lines[1] == "t,score,flag,excluded"
    assert len(lines) == 2 + 500


def test_score_flag_overrides(pipeline, tmp_path):
    assert main(["score", "--model", str(pipeline / "m.ckpt"), "--data", str(pipeline / "bench/test.csv"),
                 "--out", str(tmp_path / "s.csv"), "--delta", "0.25"]) == EXIT_OK
    assert read_scores_csv(tmp_path / "s.csv").delta == 0.25


def test_eval_reconciles_with_counts(pipeline, tmp_path):
    out = tmp_path / "report.json"
    assert main(["eval", "--scores", str(pipeline / "scores.csv"), "--data", str(pipeline / "bench/test.csv"),
                 "--f", "4", "--h", "4", "--out", str(out)]) == EXIT_OK
    rep = json.loads(out.read_text())
    assert {"fixed_delta", "best_f1", "roc_auc"} <= rep.keys()
    series = read_scores_csv(pipeline / "scores.csv")
    targets = future_anomaly_targets(load_series_csv(pipeline / "bench/test.csv").labels, 4, 4)
    flags = np.where(series.excluded, -1, series.flags)
    tp, fp, fn, tn = confusion_counts(flags, targets)
    assert (rep["fixed_delta"]["tp"], rep["fixed_delta"]["fp"], rep["fixed_delta"]["fn"]) == (tp, fp, fn)


def test_plot_is_deterministic(pipeline, tmp_path):
    args = ["plot", "--scores", str(pipeline / "scores.csv"), "--data", str(pipeline / "bench/test.csv")]
    assert main(args + ["--out", str(tmp_path / "a.svg")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b.svg")]) == EXIT_OK
    svg = (tmp_path / "a.svg").read_bytes()
    assert svg.startswith(b"<?xml") and svg == (tmp_path / "b.svg").read_bytes()


def test_label_runs():
    assert label_runs([0, 1, 1, 0, 1]) == [(1, 3), (4, 5)]
    assert label_runs([0, 0]) == []


def test_train_overrides_and_errors(pipeline, tmp_path, capsys):
    data = str(pipeline / "bench/train.csv")
    assert main(["train", "--data", data, "--config", str(pipeline / "run.json"), "--epochs", "0",
                 "--out", str(tmp_path / "init.ckpt")]) == EXIT_OK
    assert main(["train", "--data", data, "--config", str(pipeline / "run.json"), "--h", "40",
                 "--out", str(tmp_path / "x.ckpt")]) == EXIT_CONFIG
    assert main(["train", "--data", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "x.ckpt")]) == EXIT_IO
    assert main(["score", "--model", data, "--data", data, "--out", str(tmp_path / "s.csv")]) == EXIT_IO
    assert main(["bogus"]) == EXIT_CONFIG


def test_train_nonfinite_exit_code(pipeline, tmp_path, monkeypatch):
    import igcl.training as training
    from igcl.errors import NonFiniteLoss

    def boom(*a, **k):
        raise NonFiniteLoss("non-finite loss at step 0", {"step": 0})

    monkeypatch.setattr(training, "train", boom)
    assert main(["train", "--data", str(pipeline / "bench/train.csv"), "--config", str(pipeline / "run.json"),
                 "--out", str(tmp_path / "x.ckpt")]) == EXIT_NUMERIC
