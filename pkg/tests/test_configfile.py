"""Typed INI parsing: train settings, scenario specs, experiment plans."""

from __future__ import annotations

import pytest

from faultadapt.configfile import (
    ConfigFileError,
    build_arch,
    load_scenario_spec,
    load_train_settings,
)
from faultadapt.experiment import load_plan


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_train_settings_full(tmp_path):
    path = write(
        tmp_path,
        "train.ini",
        """
        [train]
        mmd_weight = 0.5      # alignment strength
        adversarial_weight = 0.2
        epochs = 12
        batch_size = 32
        learning_rate = 0.02
        seed = 4

        [model]
        extractor_hidden = 32, 16
        feature_dim = 12
        extractor_activation = relu

        [data]
        normalization = source-only
        """,
    )
    train_kwargs, model_kwargs, data_options = load_train_settings(path)
    assert train_kwargs["epochs"] == 12
    assert isinstance(train_kwargs["epochs"], int)
    assert train_kwargs["mmd_weight"] == 0.5
    assert train_kwargs["seed"] == 4
    assert model_kwargs["extractor_hidden"] == (32, 16)
    assert model_kwargs["feature_dim"] == 12
    assert data_options["normalization"] == "source-only"


def test_train_settings_defaults_when_empty(tmp_path):
    path = write(tmp_path, "empty.ini", "")
    train_kwargs, model_kwargs, data_options = load_train_settings(path)
    assert train_kwargs == {}
    assert model_kwargs == {}
    assert data_options == {"normalization": "per-domain"}


def test_train_settings_unknown_key_fails(tmp_path):
    path = write(tmp_path, "typo.ini", "[train]\nlern_rate = 0.1\n")
    with pytest.raises(ConfigFileError, match="lern_rate"):
        load_train_settings(path)


def test_train_settings_unknown_section_fails(tmp_path):
    path = write(tmp_path, "sec.ini", "[optimizer]\nlr = 0.1\n")
    with pytest.raises(ConfigFileError, match="optimizer"):
        load_train_settings(path)


def test_train_settings_bad_value_names_key(tmp_path):
    path = write(tmp_path, "bad.ini", "[train]\nepochs = soon\n")
    with pytest.raises(ConfigFileError, match="epochs"):
        load_train_settings(path)


def test_train_settings_bad_normalization_mode(tmp_path):
    path = write(tmp_path, "norm.ini", "[data]\nnormalization = fancy\n")
    with pytest.raises(ConfigFileError, match="fancy"):
        load_train_settings(path)


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigFileError, match="cannot read"):
        load_train_settings(tmp_path / "nope.ini")


def test_scenario_spec_round_trip(tmp_path):
    path = write(
        tmp_path,
        "scenario.ini",
        """
        [scenario]
        kind = class_imbalance
        num_classes = 3
        source_samples = 500
        target_samples = 500
        imbalance_ratio = 10
        label_fraction = 0.5
        seed = 2
        """,
    )
    spec = load_scenario_spec(path)
    assert spec.kind == "class_imbalance"
    assert spec.num_classes == 3
    assert spec.imbalance_ratio == 10.0
    assert spec.label_fraction == 0.5
    assert spec.seed == 2


def test_scenario_spec_overrides_win(tmp_path):
    path = write(tmp_path, "scenario.ini", "[scenario]\nkind = standard_shift\nseed = 2\n")
    spec = load_scenario_spec(path, kind="zero_shift", seed=9)
    assert spec.kind == "zero_shift"
    assert spec.seed == 9
    assert spec.shift_magnitude == 0.0


def test_scenario_spec_node_type_pairs(tmp_path):
    path = write(
        tmp_path,
        "hetero.ini",
        """
        [scenario]
        kind = heterogeneous_nodes
        node_type_mix = cpu_intensive:0.5, io_bound:0.5
        node_type_shift_scale = cpu_intensive:0.5, io_bound:1.5
        """,
    )
    spec = load_scenario_spec(path)
    assert dict(spec.node_type_mix) == {"cpu_intensive": 0.5, "io_bound": 0.5}
    assert dict(spec.node_type_shift_scale) == {"cpu_intensive": 0.5, "io_bound": 1.5}


def test_scenario_spec_bad_pair_syntax(tmp_path):
    path = write(
        tmp_path, "bad.ini", "[scenario]\nkind = standard_shift\nnode_type_mix = cpu_intensive\n"
    )
    with pytest.raises(ConfigFileError, match="name:value"):
        load_scenario_spec(path)


def test_scenario_spec_invalid_values_are_config_errors(tmp_path):
    path = write(tmp_path, "bad2.ini", "[scenario]\nkind = zero_shift\nshift_magnitude = 2\n")
    with pytest.raises(ConfigFileError, match="zero_shift"):
        load_scenario_spec(path)


def test_build_arch_applies_overrides():
    arch = build_arch(6, 4, {"extractor_hidden": (16,), "feature_dim": 8})
    assert arch.input_dim == 6
    assert arch.num_classes == 4
    assert arch.extractor_hidden == (16,)
    assert arch.feature_dim == 8


def test_build_arch_rejects_bad_overrides():
    with pytest.raises(ConfigFileError, match="model"):
        build_arch(6, 4, {"feature_dim": -1})


def test_plan_parsing(tmp_path):
    path = write(
        tmp_path,
        "plan.ini",
        """
        [plan]
        scenario = label_scarcity
        axis_values = 0.1, 0.25, 0.5, 1.0
        seeds = 0, 1, 2
        ablations = full, source_only
        holdout_fraction = 0.25

        [scenario]
        source_samples = 300
        target_samples = 300

        [train]
        epochs = 5
        """,
    )
    plan = load_plan(path)
    assert plan.scenario == "label_scarcity"
    assert plan.axis_values == (0.1, 0.25, 0.5, 1.0)
    assert plan.seeds == (0, 1, 2)
    assert plan.ablations == ("full", "source_only")
    assert plan.holdout_fraction == 0.25
    assert dict(plan.scenario_overrides)["source_samples"] == 300
    assert dict(plan.train_overrides)["epochs"] == 5
    spec = plan.base_spec(1)
    assert spec.seed == 1
    assert spec.source_samples == 300
    config = plan.base_config(2)
    assert config.seed == 2
    assert config.epochs == 5


def test_plan_heterogeneous_defaults_axis_to_node_types(tmp_path):
    path = write(tmp_path, "hplan.ini", "[plan]\nscenario = heterogeneous_nodes\n")
    plan = load_plan(path)
    assert plan.axis_values == ("cpu_intensive", "memory_intensive", "io_bound", "mixed")


def test_plan_requires_scenario_and_axis(tmp_path):
    path = write(tmp_path, "p1.ini", "[plan]\naxis_values = 1\n")
    with pytest.raises(ConfigFileError, match="scenario"):
        load_plan(path)
    path2 = write(tmp_path, "p2.ini", "[plan]\nscenario = label_scarcity\n")
    with pytest.raises(ConfigFileError, match="axis_values"):
        load_plan(path2)


def test_plan_rejects_unknown_ablation(tmp_path):
    path = write(
        tmp_path,
        "p3.ini",
        "[plan]\nscenario = label_scarcity\naxis_values = 0.5\nablations = everything\n",
    )
    with pytest.raises(ConfigFileError, match="everything"):
        load_plan(path)


def test_plan_rejects_per_cell_keys_in_scenario_section(tmp_path):
    # label_fraction and seed are owned by the axis and the [plan] seeds list.
    path = write(
        tmp_path,
        "p4.ini",
        "[plan]\nscenario = label_scarcity\naxis_values = 0.5\n\n[scenario]\nlabel_fraction = 0.5\n",
    )
    with pytest.raises(ConfigFileError, match="label_fraction"):
        load_plan(path)
