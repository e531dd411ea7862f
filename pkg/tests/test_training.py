"""Training loop: schedule math, optimizer, pseudo-labels, invariants."""

from __future__ import annotations

import math

import numpy as np
import pytest

from faultadapt.data import generate_scenario, make_dataset, mask_labels, standard_scenario
from faultadapt.model import ArchSpec, ModelParams, init_params, params_equal, predict
from faultadapt.training import (
    NonFiniteLossError,
    TrainConfig,
    grl_coefficient,
    select_pseudo_labels,
    sgd_momentum_step,
    train,
    train_source_only,
)

TINY_ARCH = ArchSpec(
    input_dim=6,
    num_classes=3,
    extractor_hidden=(8,),
    feature_dim=8,
    discriminator_hidden=(4,),
)


def tiny_pair(seed=0, n=120, label_fraction=0.25, num_classes=3):
    spec = standard_scenario(
        seed=seed,
        num_classes=num_classes,
        source_samples=n,
        target_samples=n,
        label_fraction=label_fraction,
    )
    return generate_scenario(spec)


def quick_config(**overrides) -> TrainConfig:
    base = dict(
        mmd_weight=0.5,
        adversarial_weight=0.1,
        pseudo_label_threshold=0.9,
        learning_rate=0.05,
        momentum=0.9,
        batch_size=32,
        epochs=3,
        pseudo_label_warmup_epochs=1,
        pseudo_label_class_cap=16,
        seed=0,
    )
    base.update(overrides)
    return TrainConfig(**base)


# --- schedule ---------------------------------------------------------------

def test_grl_starts_at_zero():
    assert grl_coefficient(0.0, 10.0) == 0.0


def test_grl_closed_form_at_one():
    assert abs(grl_coefficient(1.0, 10.0) - 0.9999092042625951) < 1e-12
    assert abs(grl_coefficient(1.0, 10.0) - 0.9999092) < 1e-7


def test_grl_monotone_and_bounded():
    values = [grl_coefficient(p, 10.0) for p in np.linspace(0.0, 1.0, 21)]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert all(0.0 <= v < 1.0 for v in values)


def test_grl_rejects_bad_arguments():
    with pytest.raises(ValueError):
        grl_coefficient(-0.1, 10.0)
    with pytest.raises(ValueError):
        grl_coefficient(1.1, 10.0)
    with pytest.raises(ValueError):
        grl_coefficient(0.5, 0.0)


# --- optimizer ----------------------------------------------------------------

def one_scalar_params(value: float) -> ModelParams:
    layer = ((np.array([[value]]), np.array([value])),)
    return ModelParams(layer, layer, layer)


def test_sgd_hand_trace():
    params = one_scalar_params(1.0)
    ones = one_scalar_params(1.0)
    velocity = one_scalar_params(0.0)
    params, velocity = sgd_momentum_step(params, ones, velocity, 0.1, 0.9)
    for arr in params.arrays():
        assert abs(float(arr.reshape(-1)[0]) - 0.9) < 1e-12
    params, velocity = sgd_momentum_step(params, ones, velocity, 0.1, 0.9)
    for arr in params.arrays():
        assert abs(float(arr.reshape(-1)[0]) - 0.71) < 1e-12


def test_sgd_zero_momentum_is_plain_descent():
    params = one_scalar_params(2.0)
    grads = one_scalar_params(3.0)
    velocity = one_scalar_params(0.0)
    new, _ = sgd_momentum_step(params, grads, velocity, 0.5, 0.0)
    for arr in new.arrays():
        assert float(arr.reshape(-1)[0]) == 2.0 - 0.5 * 3.0


def test_sgd_leaves_inputs_untouched():
    params = one_scalar_params(1.0)
    grads = one_scalar_params(1.0)
    velocity = one_scalar_params(0.0)
    sgd_momentum_step(params, grads, velocity, 0.1, 0.9)
    assert params_equal(params, one_scalar_params(1.0))
    assert params_equal(velocity, one_scalar_params(0.0))


def test_sgd_rejects_bad_hyperparameters():
    p = one_scalar_params(1.0)
    with pytest.raises(ValueError):
        sgd_momentum_step(p, p, p, 0.0, 0.9)
    with pytest.raises(ValueError):
        sgd_momentum_step(p, p, p, 0.1, 1.0)


# --- pseudo-label selection -------------------------------------------------------

def fixture_model():
    # Identity extractor and identity classifier: rows are logits directly.
    arch = ArchSpec(
        input_dim=2,
        num_classes=2,
        extractor_hidden=(),
        feature_dim=2,
        extractor_activation="linear",
    )
    template = init_params(arch, seed=0)
    params = ModelParams(
        ((np.eye(2), np.zeros(2)),),
        ((np.eye(2), np.zeros(2)),),
        template.discriminator,
    )
    return arch, params


def logit_for(p: float) -> float:
    return math.log(p / (1.0 - p))


def test_select_pseudo_labels_threshold_fixture():
    # Max probabilities 0.97, 0.80, 0.99 against threshold 0.95.
    arch, params = fixture_model()
    rows = np.array([[logit_for(0.97), 0.0], [logit_for(0.80), 0.0], [logit_for(0.99), 0.0]])
    target = make_dataset(rows, domain="target", class_count=2)
    picked = select_pseudo_labels(target, arch, params, threshold=0.95, class_cap=10)
    assert [p.target_sample_index for p in picked] == [0, 2]
    assert all(p.predicted_class == 0 for p in picked)
    assert picked[0].confidence == pytest.approx(0.97, abs=1e-9)
    assert picked[1].confidence == pytest.approx(0.99, abs=1e-9)


def test_select_pseudo_labels_cap_prefers_confidence():
    arch, params = fixture_model()
    rows = np.array([[logit_for(0.97), 0.0], [logit_for(0.96), 0.0], [logit_for(0.99), 0.0]])
    target = make_dataset(rows, domain="target", class_count=2)
    picked = select_pseudo_labels(target, arch, params, threshold=0.95, class_cap=1)
    assert [p.target_sample_index for p in picked] == [2]


def test_select_pseudo_labels_unattainable_threshold():
    # Clamped confidences never reach 1.0, so threshold 1.0 selects nothing.
    arch, params = fixture_model()
    rows = np.array([[100.0, 0.0], [0.0, 100.0]])
    target = make_dataset(rows, domain="target", class_count=2)
    assert select_pseudo_labels(target, arch, params, threshold=1.0, class_cap=10) == []


def test_select_pseudo_labels_vacuous_threshold_takes_all():
    arch, params = fixture_model()
    rows = np.random.default_rng(0).normal(size=(7, 2))
    target = make_dataset(rows, domain="target", class_count=2)
    picked = select_pseudo_labels(target, arch, params, threshold=1e-9, class_cap=100)
    assert [p.target_sample_index for p in picked] == list(range(7))


def test_select_pseudo_labels_skips_labeled_rows():
    arch, params = fixture_model()
    rows = np.array([[logit_for(0.99), 0.0], [logit_for(0.99), 0.0]])
    target = make_dataset(rows, labels=[0, -1], domain="target", class_count=2)
    picked = select_pseudo_labels(target, arch, params, threshold=0.9, class_cap=10)
    assert [p.target_sample_index for p in picked] == [1]


def test_select_pseudo_labels_tie_breaks_to_lower_index():
    arch, params = fixture_model()
    row = [logit_for(0.98), 0.0]
    target = make_dataset(np.array([row, row, row]), domain="target", class_count=2)
    picked = select_pseudo_labels(target, arch, params, threshold=0.9, class_cap=2)
    assert [p.target_sample_index for p in picked] == [0, 1]


# --- full loop -----------------------------------------------------------------------

def test_train_runs_and_records_history():
    source, target = tiny_pair()
    config = quick_config()
    params, history = train(source, target, TINY_ARCH, config)
    assert len(history) == config.epochs
    for rec in history.records:
        assert math.isfinite(rec.breakdown.l_total)
        assert 0.0 <= rec.source_accuracy <= 1.0
        assert rec.target_accuracy is None or 0.0 <= rec.target_accuracy <= 1.0
        assert rec.pseudo_label_count <= TINY_ARCH.num_classes * config.pseudo_label_class_cap
    assert history.records[0].pseudo_label_count == 0  # warmup epoch


def test_train_is_deterministic():
    source, target = tiny_pair(seed=3)
    config = quick_config(seed=7)
    p1, h1 = train(source, target, TINY_ARCH, config)
    p2, h2 = train(source, target, TINY_ARCH, config)
    assert params_equal(p1, p2)
    assert h1 == h2


def test_train_seed_changes_outcome():
    source, target = tiny_pair(seed=3)
    p1, _ = train(source, target, TINY_ARCH, quick_config(seed=1))
    p2, _ = train(source, target, TINY_ARCH, quick_config(seed=2))
    assert not params_equal(p1, p2)


def test_reduction_to_source_only_is_exact():
    source, target = tiny_pair(seed=5)
    target = mask_labels(target, 0.0, seed=0)  # nothing labeled on the target side
    config = quick_config(
        mmd_weight=0.0,
        adversarial_weight=0.0,
        pseudo_label_threshold=1.0,
        epochs=4,
        seed=11,
    )
    full_params, full_hist = train(source, target, TINY_ARCH, config)
    solo_params, _ = train_source_only(source, target, TINY_ARCH, config)
    assert params_equal(full_params, solo_params)
    # The disabled terms contribute exactly nothing to the recorded total.
    for rec in full_hist.records:
        assert rec.breakdown.l_total == rec.breakdown.l_source
        assert rec.pseudo_label_count == 0


def test_pseudo_labels_appear_after_warmup():
    source, target = tiny_pair(seed=9, n=160, label_fraction=0.1)
    config = quick_config(
        epochs=5,
        pseudo_label_warmup_epochs=2,
        pseudo_label_threshold=0.5,
        learning_rate=0.1,
    )
    _, history = train(source, target, TINY_ARCH, config)
    counts = [r.pseudo_label_count for r in history.records]
    assert counts[0] == 0 and counts[1] == 0
    assert max(counts[2:]) > 0


def test_grl_coefficient_recorded_rises():
    source, target = tiny_pair(seed=2)
    _, history = train(source, target, TINY_ARCH, quick_config(epochs=3))
    coefs = [r.grl_coefficient for r in history.records]
    assert coefs[0] < coefs[-1]
    assert all(0.0 <= c < 1.0 for c in coefs)


def test_train_validates_inputs():
    source, target = tiny_pair()
    with pytest.raises(ValueError, match="unlabeled"):
        train(mask_labels(source, 0.5, seed=0), target, TINY_ARCH, quick_config())
    bad_arch = ArchSpec(input_dim=7, num_classes=3)
    with pytest.raises(ValueError, match="width"):
        train(source, target, bad_arch, quick_config())
    narrow = ArchSpec(input_dim=6, num_classes=2, extractor_hidden=(4,), feature_dim=4)
    with pytest.raises(ValueError, match="classes"):
        train(source, target, narrow, quick_config())


def test_train_aborts_on_divergence():
    source, target = tiny_pair(seed=1)
    config = quick_config(learning_rate=1e9, mmd_weight=10.0, epochs=3)
    with pytest.raises(NonFiniteLossError) as err, np.errstate(all="ignore"):
        train(source, target, TINY_ARCH, config)
    assert "non-finite" in str(err.value)
    assert "l_" in str(err.value)
    assert err.value.epoch >= 0 and err.value.step >= 0


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(mmd_weight=-1.0)
    with pytest.raises(ValueError):
        TrainConfig(pseudo_label_threshold=0.0)
    with pytest.raises(ValueError):
        TrainConfig(momentum=1.0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=1)
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)


def test_zero_shift_training_sanity():
    # With no domain gap a trained model scores both domains alike.
    spec = standard_scenario(
        "zero_shift", seed=0, source_samples=600, target_samples=600, label_fraction=1.0
    )
    source, target = generate_scenario(spec)
    config = TrainConfig(
        mmd_weight=0.0,
        adversarial_weight=0.0,
        pseudo_label_threshold=1.0,
        epochs=30,
        batch_size=64,
        learning_rate=0.05,
        seed=0,
    )
    params, history = train_source_only(source, target, arch_for(spec), config)
    final = history.records[-1]
    assert final.source_accuracy >= 0.95
    assert abs(final.source_accuracy - final.target_accuracy) <= 0.03


def arch_for(spec):
    return ArchSpec(input_dim=spec.feature_dim, num_classes=spec.num_classes)
