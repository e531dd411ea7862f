"""Adversarial adaptation training loop with pseudo-label self-training.

Every step draws one labeled source batch and one target batch, pushes both
through the shared extractor and combines three gradient flows: supervised
cross-entropy (source rows plus any labeled or pseudo-labeled target rows),
feature-mean alignment, and the domain objective whose gradient reaches the
extractor through reversal. After a warmup the pseudo-label pool is rebuilt
from scratch once per epoch from confident predictions on unlabeled target
rows; it is never carried over between epochs.

All randomness flows from independent child streams of the config seed, so a
run is bitwise reproducible and the source-only reduction consumes exactly
the same source batch stream as the full trainer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import losses
from .data import UNLABELED, Dataset
from .linalg import EPS, grad_reverse
from .model import (
    ArchSpec,
    ModelParams,
    classifier_backward,
    classifier_forward,
    discriminator_backward,
    discriminator_forward,
    extractor_backward,
    extractor_forward,
    init_params,
    map_params,
    predict,
    zeros_like_params,
)


class NonFiniteLossError(RuntimeError):
    """A loss term stopped being finite; training aborts immediately."""

    def __init__(self, term: str, value: float, epoch: int, step: int):
        super().__init__(
            f"non-finite {term} ({value!r}) at epoch {epoch}, step {step}; "
            "try a lower learning rate or smaller loss weights"
        )
        self.term = term
        self.value = value
        self.epoch = epoch
        self.step = step


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the adaptation loop."""

    mmd_weight: float = 1.0
    adversarial_weight: float = 1.0
    pseudo_label_threshold: float = 0.95
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 50
    grl_gamma: float = 10.0
    pseudo_label_warmup_epochs: int = 5
    pseudo_label_class_cap: int = 64
    pseudo_label_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.mmd_weight < 0 or self.adversarial_weight < 0:
            raise ValueError("loss weights must be nonnegative")
        if not 0.0 < self.pseudo_label_threshold <= 1.0:
            raise ValueError(
                f"pseudo_label_threshold must lie in (0, 1], got {self.pseudo_label_threshold}"
            )
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.grl_gamma <= 0:
            raise ValueError("grl_gamma must be positive")
        if self.pseudo_label_warmup_epochs < 0:
            raise ValueError("pseudo_label_warmup_epochs must be >= 0")
        if self.pseudo_label_class_cap < 1:
            raise ValueError("pseudo_label_class_cap must be >= 1")
        if self.pseudo_label_weight <= 0:
            raise ValueError("pseudo_label_weight must be positive")


@dataclass(frozen=True)
class PseudoLabel:
    """A confident prediction adopted as a training label."""

    target_sample_index: int
    predicted_class: int
    confidence: float


@dataclass(frozen=True)
class EpochRecord:
    """One row of training history."""

    breakdown: losses.LossBreakdown
    source_accuracy: float
    target_accuracy: float | None
    pseudo_label_count: int
    grl_coefficient: float


@dataclass(frozen=True)
class TrainHistory:
    """Per-epoch records of one training run."""

    records: tuple[EpochRecord, ...]

    def __len__(self) -> int:
        return len(self.records)


def grl_coefficient(progress: float, gamma: float) -> float:
    """Reversal strength schedule 2 / (1 + exp(-gamma * progress)) - 1.

    Starts at 0 so early noisy discriminator gradients cannot tear the
    extractor apart, and saturates toward 1 as training progresses.
    """
    if not 0.0 <= progress <= 1.0:
        raise ValueError(f"progress must lie in [0, 1], got {progress}")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return 2.0 / (1.0 + math.exp(-gamma * progress)) - 1.0


def sgd_momentum_step(params: ModelParams, grads: ModelParams, velocity: ModelParams,
                      learning_rate: float, momentum: float):
    """Classical momentum update: v <- m*v - lr*g, theta <- theta + v.

    Builds new parameter and velocity trees; the inputs are left untouched.
    """
    if learning_rate <= 0:
        raise ValueError("learning_rate must be positive")
    if not 0.0 <= momentum < 1.0:
        raise ValueError(f"momentum must lie in [0, 1), got {momentum}")
    new_velocity = map_params(lambda v, g: momentum * v - learning_rate * g, velocity, grads)
    new_params = map_params(lambda p, v: p + v, params, new_velocity)
    return new_params, new_velocity


def select_pseudo_labels(target: Dataset, arch: ArchSpec, params: ModelParams,
                         threshold: float, class_cap: int) -> list[PseudoLabel]:
    """Confident predictions on unlabeled target rows, capped per class.

    Confidence is the clamped top class probability. Rows at or above the
    threshold are kept, at most class_cap per predicted class, preferring
    higher confidence (ties broken by lower row index). The result is sorted
    by row index.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    if class_cap < 1:
        raise ValueError("class_cap must be >= 1")
    candidates = np.flatnonzero(~target.labeled_mask())
    if candidates.size == 0:
        return []
    preds, confidence = predict(target.features[candidates], arch, params)
    confidence = np.clip(confidence, EPS, 1.0 - EPS)
    keep = confidence >= threshold
    selected: list[PseudoLabel] = []
    for cls in range(arch.num_classes):
        in_class = np.flatnonzero(keep & (preds == cls))
        if in_class.size == 0:
            continue
        order = np.lexsort((candidates[in_class], -confidence[in_class]))
        for j in order[:class_cap]:
            i = in_class[j]
            selected.append(
                PseudoLabel(
                    target_sample_index=int(candidates[i]),
                    predicted_class=cls,
                    confidence=float(confidence[i]),
                )
            )
    selected.sort(key=lambda p: p.target_sample_index)
    return selected


def _check_finite(value: float, term: str, epoch: int, step: int) -> float:
    if not math.isfinite(value):
        raise NonFiniteLossError(term, value, epoch, step)
    return value


def _validate_inputs(source: Dataset, target: Dataset, arch: ArchSpec):
    if len(source) == 0:
        raise ValueError("source dataset is empty")
    if len(target) == 0:
        raise ValueError("target dataset is empty")
    unlabeled = int(np.sum(~source.labeled_mask()))
    if unlabeled:
        raise ValueError(f"source dataset has {unlabeled} unlabeled rows; all must be labeled")
    for name, ds in (("source", source), ("target", target)):
        if ds.feature_dim != arch.input_dim:
            raise ValueError(
                f"{name} features have width {ds.feature_dim}, architecture expects {arch.input_dim}"
            )
        labeled = ds.labels[ds.labeled_mask()]
        if labeled.size and labeled.max() >= arch.num_classes:
            raise ValueError(
                f"{name} labels reach {labeled.max()}, architecture has {arch.num_classes} classes"
            )


def _epoch_eval(xs, ys, target: Dataset, arch, params):
    preds_s, _ = predict(xs, arch, params)
    source_acc = float(np.mean(preds_s == ys))
    mask = target.labeled_mask()
    if np.any(mask):
        preds_t, _ = predict(target.features[mask], arch, params)
        target_acc = float(np.mean(preds_t == target.labels[mask]))
    else:
        target_acc = None
    return source_acc, target_acc


def train(source: Dataset, target: Dataset, arch: ArchSpec, config: TrainConfig):
    """Run the full adaptation loop.

    Returns:
        (params, history) where history holds one EpochRecord per epoch with
        mean loss terms, accuracies, the pseudo-label pool size and the last
        reversal coefficient of the epoch.

    Raises:
        ValueError: empty or unlabeled source rows, width/label mismatches.
        NonFiniteLossError: a loss term diverged.
    """
    _validate_inputs(source, target, arch)
    lam_mmd = config.mmd_weight
    lam_adv = config.adversarial_weight

    params = init_params(arch, config.seed)
    velocity = zeros_like_params(params)
    children = np.random.SeedSequence(config.seed).spawn(3)
    rng_source = np.random.default_rng(children[0])
    rng_target = np.random.default_rng(children[1])
    rng_pool = np.random.default_rng(children[2])

    xs, ys = source.features, source.labels
    xt = target.features
    n_s, n_t = len(source), len(target)
    labeled_t = np.flatnonzero(target.labeled_mask())

    steps_per_epoch = math.ceil(n_s / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    progress_denom = max(total_steps - 1, 1)

    order_t = rng_target.permutation(n_t)
    pos_t = 0
    take_t = min(config.batch_size, n_t)

    def next_target_batch():
        nonlocal order_t, pos_t
        if pos_t + take_t > n_t:
            order_t = rng_target.permutation(n_t)
            pos_t = 0
        batch = order_t[pos_t:pos_t + take_t]
        pos_t += take_t
        return batch

    records = []
    global_step = 0
    for epoch in range(config.epochs):
        pseudo: list[PseudoLabel] = []
        if epoch >= config.pseudo_label_warmup_epochs:
            pseudo = select_pseudo_labels(
                target, arch, params, config.pseudo_label_threshold,
                config.pseudo_label_class_cap,
            )
        pool_idx = np.concatenate(
            [labeled_t, np.array([p.target_sample_index for p in pseudo], dtype=np.int64)]
        )
        pool_lab = np.concatenate(
            [target.labels[labeled_t],
             np.array([p.predicted_class for p in pseudo], dtype=np.int64)]
        )
        pool_w = np.concatenate(
            [np.ones(labeled_t.size), np.full(len(pseudo), config.pseudo_label_weight)]
        )

        order_s = rng_source.permutation(n_s)
        sum_ls = sum_mmd = sum_adv = 0.0
        grl = 0.0
        for start in range(0, n_s, config.batch_size):
            step = start // config.batch_size
            progress = global_step / progress_denom
            grl = grl_coefficient(progress, config.grl_gamma)
            src = order_s[start:start + config.batch_size]
            tgt = next_target_batch()

            if pool_idx.size:
                take = min(config.batch_size, pool_idx.size)
                chosen = rng_pool.choice(pool_idx.size, size=take, replace=False)
            else:
                chosen = np.empty(0, dtype=np.int64)

            f_s, cache_s = extractor_forward(xs[src], arch, params)
            f_t, cache_t = extractor_forward(xt[tgt], arch, params)
            if chosen.size:
                f_p, cache_p = extractor_forward(xt[pool_idx[chosen]], arch, params)
                cls_feats = np.vstack([f_s, f_p])
                cls_labels = np.concatenate([ys[src], pool_lab[chosen]])
                cls_weights = np.concatenate([np.ones(src.size), pool_w[chosen]])
            else:
                cls_feats = f_s
                cls_labels = ys[src]
                cls_weights = None

            probs, cls_cache = classifier_forward(cls_feats, arch, params)
            l_s, g_logits = losses.source_loss(probs, cls_labels, cls_weights)
            l_mmd, g_fs_mmd, g_ft_mmd = losses.mmd_loss(f_s, f_t)
            d_s, dcache_s = discriminator_forward(f_s, arch, params)
            d_t, dcache_t = discriminator_forward(f_t, arch, params)
            l_adv, g_ds, g_dt = losses.domain_adversarial_loss(d_s, d_t)

            _check_finite(l_s, "source cross-entropy (l_source)", epoch, step)
            _check_finite(l_mmd, "feature-mean discrepancy (l_mmd)", epoch, step)
            _check_finite(l_adv, "domain adversarial loss (l_adv)", epoch, step)
            l_total = losses.total_loss(l_s, l_mmd, l_adv, lam_mmd, lam_adv)
            _check_finite(l_total, "total loss (l_total)", epoch, step)
            sum_ls += l_s
            sum_mmd += l_mmd
            sum_adv += l_adv

            g_clsfeat, g_classifier = classifier_backward(g_logits, params, cls_cache)
            g_fs = g_clsfeat[:src.size].copy()
            if lam_mmd != 0.0:
                g_fs += lam_mmd * g_fs_mmd
            g_ft = None
            if lam_mmd != 0.0:
                g_ft = lam_mmd * g_ft_mmd
            if lam_adv != 0.0:
                gfs_adv, gdis_s = discriminator_backward(lam_adv * g_ds, arch, params, dcache_s)
                gft_adv, gdis_t = discriminator_backward(lam_adv * g_dt, arch, params, dcache_t)
                g_discriminator = tuple(
                    (dw1 + dw2, db1 + db2)
                    for (dw1, db1), (dw2, db2) in zip(gdis_s, gdis_t)
                )
                g_fs += grad_reverse(gfs_adv, grl)
                g_ft = grad_reverse(gft_adv, grl) if g_ft is None else g_ft + grad_reverse(gft_adv, grl)
            else:
                g_discriminator = tuple(
                    (np.zeros_like(w), np.zeros_like(b)) for w, b in params.discriminator
                )

            _, g_extractor = extractor_backward(g_fs, arch, params, cache_s)
            if g_ft is not None:
                _, g_ext_t = extractor_backward(g_ft, arch, params, cache_t)
                g_extractor = tuple(
                    (dw1 + dw2, db1 + db2)
                    for (dw1, db1), (dw2, db2) in zip(g_extractor, g_ext_t)
                )
            if chosen.size:
                g_fp = g_clsfeat[src.size:]
                _, g_ext_p = extractor_backward(g_fp, arch, params, cache_p)
                g_extractor = tuple(
                    (dw1 + dw2, db1 + db2)
                    for (dw1, db1), (dw2, db2) in zip(g_extractor, g_ext_p)
                )

            grads = ModelParams(g_extractor, g_classifier, g_discriminator)
            params, velocity = sgd_momentum_step(
                params, grads, velocity, config.learning_rate, config.momentum
            )
            global_step += 1

        mean_ls = sum_ls / steps_per_epoch
        mean_mmd = sum_mmd / steps_per_epoch
        mean_adv = sum_adv / steps_per_epoch
        breakdown = losses.make_breakdown(mean_ls, mean_mmd, mean_adv, lam_mmd, lam_adv)
        source_acc, target_acc = _epoch_eval(xs, ys, target, arch, params)
        records.append(
            EpochRecord(breakdown, source_acc, target_acc, len(pseudo), grl)
        )
    return params, TrainHistory(tuple(records))


def train_source_only(source: Dataset, target: Dataset, arch: ArchSpec, config: TrainConfig):
    """Plain supervised training on the source domain only.

    Mirrors train() when both loss weights are zero and pseudo-labels are
    disabled: identical initialization and an identical source batch stream,
    so the extractor and classifier end up exactly equal. The target dataset
    is used only for the per-epoch accuracy record.
    """
    _validate_inputs(source, target, arch)
    params = init_params(arch, config.seed)
    velocity = zeros_like_params(params)
    children = np.random.SeedSequence(config.seed).spawn(3)
    rng_source = np.random.default_rng(children[0])

    xs, ys = source.features, source.labels
    n_s = len(source)
    steps_per_epoch = math.ceil(n_s / config.batch_size)

    records = []
    for epoch in range(config.epochs):
        order_s = rng_source.permutation(n_s)
        sum_ls = 0.0
        for start in range(0, n_s, config.batch_size):
            step = start // config.batch_size
            src = order_s[start:start + config.batch_size]
            f_s, cache_s = extractor_forward(xs[src], arch, params)
            probs, cls_cache = classifier_forward(f_s, arch, params)
            l_s, g_logits = losses.source_loss(probs, ys[src])
            _check_finite(l_s, "source cross-entropy (l_source)", epoch, step)
            sum_ls += l_s
            g_feat, g_classifier = classifier_backward(g_logits, params, cls_cache)
            _, g_extractor = extractor_backward(g_feat, arch, params, cache_s)
            g_discriminator = tuple(
                (np.zeros_like(w), np.zeros_like(b)) for w, b in params.discriminator
            )
            grads = ModelParams(g_extractor, g_classifier, g_discriminator)
            params, velocity = sgd_momentum_step(
                params, grads, velocity, config.learning_rate, config.momentum
            )
        mean_ls = sum_ls / steps_per_epoch
        breakdown = losses.make_breakdown(mean_ls, 0.0, 0.0, 0.0, 0.0)
        source_acc, target_acc = _epoch_eval(xs, ys, target, arch, params)
        records.append(EpochRecord(breakdown, source_acc, target_acc, 0, 0.0))
    return params, TrainHistory(tuple(records))
