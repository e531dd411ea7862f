"""Command line surface: subcommands, exit codes, files on disk."""

from __future__ import annotations

import numpy as np
import pytest

from faultadapt.cli import run
from faultadapt.data import load_trace_csv
from faultadapt.persistence import load_model, read_history_csv

FAST_TRAIN_INI = """
[train]
epochs = 3
batch_size = 32
learning_rate = 0.05
pseudo_label_warmup_epochs = 1

[model]
extractor_hidden = 8
feature_dim = 8
discriminator_hidden = 4
"""


@pytest.fixture()
def traces(tmp_path):
    data_dir = tmp_path / "data"
    code = run(
        [
            "generate",
            "--scenario",
            "standard_shift",
            "--seed",
            "1",
            "--out",
            str(data_dir),
        ]
    )
    assert code == 0
    return data_dir


@pytest.fixture()
def spec_file(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(
        "[scenario]\nkind = standard_shift\nsource_samples = 150\n"
        "target_samples = 150\nlabel_fraction = 0.2\nseed = 3\n"
    )
    return path


@pytest.fixture()
def trained(tmp_path, spec_file):
    data_dir = tmp_path / "data"
    assert run(["generate", "--spec", str(spec_file), "--out", str(data_dir)]) == 0
    config = tmp_path / "train.ini"
    config.write_text(FAST_TRAIN_INI)
    model = tmp_path / "model.ckpt"
    code = run(
        [
            "train",
            "--source",
            str(data_dir / "source.csv"),
            "--target",
            str(data_dir / "target.csv"),
            "--config",
            str(config),
            "--out",
            str(model),
            "--no-figures",
        ]
    )
    assert code == 0
    return data_dir, model


def test_generate_writes_reloadable_pair(traces):
    source = load_trace_csv(traces / "source.csv", default_domain="source")
    target = load_trace_csv(traces / "target.csv")
    assert len(source) == 2000
    assert len(target) == 2000
    assert source.labeled_mask().all()
    assert 0 < int(target.labeled_mask().sum()) < len(target)


def test_generate_is_deterministic(tmp_path, spec_file):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["generate", "--spec", str(spec_file), "--out", str(a)]) == 0
    assert run(["generate", "--spec", str(spec_file), "--out", str(b)]) == 0
    assert (a / "source.csv").read_bytes() == (b / "source.csv").read_bytes()
    assert (a / "target.csv").read_bytes() == (b / "target.csv").read_bytes()


def test_generate_env_var_overrides_out(tmp_path, spec_file, monkeypatch):
    override = tmp_path / "redirected"
    monkeypatch.setenv("FAULTADAPT_OUT_DIR", str(override))
    assert run(["generate", "--spec", str(spec_file), "--out", str(tmp_path / "ignored")]) == 0
    assert (override / "source.csv").exists()
    assert not (tmp_path / "ignored").exists()


def test_train_writes_model_history_and_default_figure(tmp_path, spec_file):
    data_dir = tmp_path / "data"
    assert run(["generate", "--spec", str(spec_file), "--out", str(data_dir)]) == 0
    config = tmp_path / "train.ini"
    config.write_text(FAST_TRAIN_INI)
    model = tmp_path / "model.ckpt"
    code = run(
        [
            "train",
            "--source",
            str(data_dir / "source.csv"),
            "--target",
            str(data_dir / "target.csv"),
            "--config",
            str(config),
            "--out",
            str(model),
        ]
    )
    assert code == 0
    checkpoint = load_model(model)
    assert checkpoint.arch.input_dim == 6
    assert checkpoint.normalization is not None
    history = read_history_csv(f"{model}.history.csv")
    assert len(history) == 3
    figure = tmp_path / "model.ckpt.history.png"
    assert figure.exists()


def test_train_seed_flag_changes_model(tmp_path, spec_file):
    data_dir = tmp_path / "data"
    assert run(["generate", "--spec", str(spec_file), "--out", str(data_dir)]) == 0
    config = tmp_path / "train.ini"
    config.write_text(FAST_TRAIN_INI)
    args = [
        "train",
        "--source",
        str(data_dir / "source.csv"),
        "--target",
        str(data_dir / "target.csv"),
        "--config",
        str(config),
        "--no-figures",
    ]
    m1, m2, m3 = (tmp_path / n for n in ("m1.ckpt", "m2.ckpt", "m3.ckpt"))
    assert run(args + ["--out", str(m1), "--seed", "5"]) == 0
    assert run(args + ["--out", str(m2), "--seed", "5"]) == 0
    assert run(args + ["--out", str(m3), "--seed", "6"]) == 0
    assert m1.read_bytes() == m2.read_bytes()
    assert m1.read_bytes() != m3.read_bytes()


def test_eval_writes_report_and_confusion_figure(tmp_path, trained):
    data_dir, model = trained
    report = tmp_path / "report.csv"
    code = run(
        ["eval", "--model", str(model), "--data", str(data_dir / "target.csv"),
         "--report", str(report)]
    )
    assert code == 0
    lines = report.read_text().strip().split("\n")
    assert lines[0] == "metric,value"
    names = [ln.split(",")[0] for ln in lines[1:]]
    assert "accuracy" in names and "macro_f1" in names and "macro_auc" in names
    assert any(n.startswith("f1_class_") for n in names)
    assert any(n.startswith("confusion_") for n in names)
    assert (tmp_path / "report_confusion.png").exists()


def test_eval_rejects_unlabeled_data(tmp_path, trained, capsys):
    data_dir, model = trained
    # Strip every label from the target file.
    target = load_trace_csv(data_dir / "target.csv")
    from faultadapt.data import mask_labels, write_trace_csv

    bare = mask_labels(target, 0.0, seed=0)
    bare_path = tmp_path / "bare.csv"
    write_trace_csv(bare, bare_path)
    code = run(
        ["eval", "--model", str(model), "--data", str(bare_path),
         "--report", str(tmp_path / "r.csv"), "--no-figures"]
    )
    assert code == 1
    assert "no labeled rows" in capsys.readouterr().err


def test_predict_stdout_and_file(tmp_path, trained, capsys):
    data_dir, model = trained
    code = run(["predict", "--model", str(model), "--data", str(data_dir / "target.csv")])
    assert code == 0
    out = capsys.readouterr().out
    lines = out.strip().split("\n")
    assert lines[0] == "row,predicted_class,confidence"
    assert len(lines) == 1 + 150
    first = lines[1].split(",")
    assert first[0] == "1"
    assert 0.0 < float(first[2]) <= 1.0

    out_path = tmp_path / "preds.csv"
    code = run(
        ["predict", "--model", str(model), "--data", str(data_dir / "target.csv"),
         "--out", str(out_path)]
    )
    assert code == 0
    assert out_path.read_text().startswith("row,predicted_class,confidence")


def test_predict_rejects_width_mismatch(tmp_path, trained, capsys):
    _, model = trained
    bad = tmp_path / "narrow.csv"
    bad.write_text("cpu_usage,mem_usage,label\n0.5,0.5,0\n0.25,0.75,1\n")
    code = run(
        ["predict", "--model", str(model), "--data", str(bad)]
    )
    assert code == 1
    assert "feature columns" in capsys.readouterr().err


def test_experiment_subcommand(tmp_path, capsys):
    plan = tmp_path / "plan.ini"
    plan.write_text(
        """
        [plan]
        scenario = label_scarcity
        axis_values = 0.5, 1.0
        seeds = 0, 1
        ablations = full, source_only

        [scenario]
        source_samples = 120
        target_samples = 120

        [train]
        epochs = 2
        batch_size = 32

        [model]
        extractor_hidden = 8
        feature_dim = 8
        discriminator_hidden = 4
        """
    )
    out_dir = tmp_path / "results"
    code = run(["experiment", "--plan", str(plan), "--out", str(out_dir)])
    assert code == 0
    summary = (out_dir / "summary.csv").read_text().strip().split("\n")
    assert len(summary) == 1 + 2 * 2 * 2
    assert (out_dir / "summary_agg.csv").exists()
    assert (out_dir / "label_scarcity_accuracy.png").exists()
    captured = capsys.readouterr()
    assert "summary.csv" in captured.out


def test_unknown_flag_exits_with_usage(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["generate", "--bogus"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_subcommand_exits_with_usage(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["transmogrify"])
    assert exc.value.code == 2


def test_missing_input_file_is_reported_not_raised(tmp_path, capsys):
    code = run(
        ["train", "--source", str(tmp_path / "nope.csv"), "--target",
         str(tmp_path / "nope2.csv"), "--out", str(tmp_path / "m.ckpt")]
    )
    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "Traceback" not in err


def test_generate_rejects_bad_spec_file(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nshift_magnitude = plenty\n")
    code = run(["generate", "--spec", str(bad), "--out", str(tmp_path / "d")])
    assert code == 1
    assert "shift_magnitude" in capsys.readouterr().err
