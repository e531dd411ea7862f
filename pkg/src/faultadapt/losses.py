"""Loss terms of the adaptation objective and their exact gradients.

Three terms are combined: supervised cross-entropy on labeled samples, a
linear-kernel discrepancy between batch feature means, and a binary
cross-entropy domain objective that the discriminator descends while the
extractor ascends through gradient reversal. The recorded total is always
``l_source + mmd_weight * l_mmd + adversarial_weight * l_adv``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import EPS, ShapeError


@dataclass(frozen=True)
class LossBreakdown:
    """Per-step (or per-epoch mean) values of the objective terms."""

    l_source: float
    l_mmd: float
    l_adv: float
    l_total: float


def source_loss(probs: np.ndarray, labels: np.ndarray, sample_weight=None):
    """Weighted mean cross-entropy of true-class probabilities.

    Args:
        probs: softmax outputs, shape (n, num_classes).
        labels: integer class per row, shape (n,).
        sample_weight: optional positive weight per row; defaults to 1.

    Returns:
        (loss, grad) where grad is d loss / d logits, shape (n, num_classes),
        the standard softmax cross-entropy form.
    """
    labels = np.asarray(labels)
    n, k = probs.shape
    if labels.shape != (n,):
        raise ShapeError(f"labels shape {labels.shape} does not match {n} rows")
    if labels.size == 0:
        raise ValueError("source_loss needs at least one labeled sample")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels must lie in [0, {k}), got range [{labels.min()}, {labels.max()}]")
    if sample_weight is None:
        weights = np.ones(n)
    else:
        weights = np.asarray(sample_weight, dtype=np.float64)
        if weights.shape != (n,):
            raise ShapeError(f"sample_weight shape {weights.shape} does not match {n} rows")
        if np.any(weights <= 0):
            raise ValueError("sample weights must be positive")
    total_weight = weights.sum()
    p_true = probs[np.arange(n), labels]
    loss = float(np.sum(weights * -np.log(np.clip(p_true, EPS, 1.0 - EPS))) / total_weight)
    grad = probs * (weights / total_weight)[:, None]
    grad[np.arange(n), labels] -= weights / total_weight
    return loss, grad


def mmd_loss(f_s: np.ndarray, f_t: np.ndarray):
    """Squared distance between source and target batch feature means.

    Returns:
        (loss, grad_fs, grad_ft). Every source row shares the gradient
        ``(2/n_s) * (mu_s - mu_t)`` and target rows its negation scaled by
        ``2/n_t``.
    """
    if f_s.shape[1] != f_t.shape[1]:
        raise ShapeError(
            f"feature widths differ: source {f_s.shape[1]}, target {f_t.shape[1]}"
        )
    if f_s.shape[0] == 0 or f_t.shape[0] == 0:
        raise ValueError("mmd_loss needs at least one row per domain")
    diff = f_s.mean(axis=0) - f_t.mean(axis=0)
    loss = float(diff @ diff)
    grad_fs = np.broadcast_to((2.0 / f_s.shape[0]) * diff, f_s.shape).copy()
    grad_ft = np.broadcast_to((-2.0 / f_t.shape[0]) * diff, f_t.shape).copy()
    return loss, grad_fs, grad_ft


def domain_adversarial_loss(d_s: np.ndarray, d_t: np.ndarray):
    """Two-term binary cross-entropy on domain probabilities.

    ``d_s`` and ``d_t`` are discriminator outputs (probability of source) for
    source and target rows. The discriminator minimizes this value; the
    extractor maximizes it through gradient reversal. At an undecided
    discriminator (all outputs 0.5) the value is 2*ln(2).

    Returns:
        (loss, grad_ds, grad_dt) with gradients w.r.t. the probabilities.
    """
    d_s = np.asarray(d_s, dtype=np.float64)
    d_t = np.asarray(d_t, dtype=np.float64)
    if d_s.size == 0 or d_t.size == 0:
        raise ValueError("domain_adversarial_loss needs at least one row per domain")
    n_s = d_s.size
    n_t = d_t.size
    loss = float(-np.log(d_s).mean() - np.log(1.0 - d_t).mean())
    grad_ds = -1.0 / (n_s * d_s)
    grad_dt = 1.0 / (n_t * (1.0 - d_t))
    return loss, grad_ds, grad_dt


def total_loss(l_s: float, l_mmd: float, l_adv: float, mmd_weight: float, adversarial_weight: float) -> float:
    """Weighted sum of the three terms; zero-weight terms are skipped exactly."""
    if mmd_weight < 0 or adversarial_weight < 0:
        raise ValueError(
            f"loss weights must be nonnegative, got {mmd_weight} and {adversarial_weight}"
        )
    total = l_s
    if mmd_weight != 0.0:
        total = total + mmd_weight * l_mmd
    if adversarial_weight != 0.0:
        total = total + adversarial_weight * l_adv
    return total


def make_breakdown(l_s: float, l_mmd: float, l_adv: float, mmd_weight: float, adversarial_weight: float) -> LossBreakdown:
    """Bundle the three terms with their weighted total."""
    return LossBreakdown(l_s, l_mmd, l_adv, total_loss(l_s, l_mmd, l_adv, mmd_weight, adversarial_weight))
