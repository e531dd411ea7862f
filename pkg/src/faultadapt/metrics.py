"""Classification quality measures: accuracy, macro F1, one-vs-rest AUC.

Macro averages treat every class equally. Classes that never occur and are
never predicted contribute an F1 of zero rather than being dropped, while the
AUC average skips classes absent from the labels because their ranking is
undefined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .linalg import ShapeError


@dataclass(frozen=True)
class MetricsReport:
    """Bundle of evaluation results for one labeled dataset."""

    accuracy: float
    macro_f1: float
    macro_auc: float
    per_class_f1: tuple[float, ...]
    confusion: np.ndarray


def _check_labels(labels: np.ndarray, preds: np.ndarray, num_classes: int):
    if labels.shape != preds.shape:
        raise ShapeError(f"labels shape {labels.shape} does not match preds {preds.shape}")
    if labels.size == 0:
        raise ValueError("metrics need at least one sample")
    for name, arr in (("labels", labels), ("predictions", preds)):
        if arr.min() < 0 or arr.max() >= num_classes:
            raise ValueError(
                f"{name} must lie in [0, {num_classes}), got range [{arr.min()}, {arr.max()}]"
            )


def confusion_matrix(labels, preds, num_classes: int) -> np.ndarray:
    """Count matrix with true classes as rows and predicted classes as columns."""
    labels = np.asarray(labels, dtype=np.int64)
    preds = np.asarray(preds, dtype=np.int64)
    _check_labels(labels, preds, num_classes)
    flat = labels * num_classes + preds
    return np.bincount(flat, minlength=num_classes * num_classes).reshape(
        num_classes, num_classes
    )


def accuracy(labels, preds) -> float:
    """Fraction of exact matches."""
    labels = np.asarray(labels)
    preds = np.asarray(preds)
    if labels.shape != preds.shape:
        raise ShapeError(f"labels shape {labels.shape} does not match preds {preds.shape}")
    if labels.size == 0:
        raise ValueError("accuracy needs at least one sample")
    return float(np.mean(labels == preds))


def per_class_f1(confusion: np.ndarray) -> np.ndarray:
    """F1 per class; any zero denominator yields 0 for that class."""
    tp = np.diag(confusion).astype(np.float64)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    denom = 2.0 * tp + fp + fn
    return np.where(denom > 0, 2.0 * tp / np.where(denom > 0, denom, 1.0), 0.0)


def macro_f1(confusion: np.ndarray) -> float:
    """Unweighted mean of per-class F1 over all classes of the matrix."""
    return float(per_class_f1(confusion).mean())


def macro_auc_ovr(scores: np.ndarray, labels) -> float:
    """Macro one-vs-rest AUC from per-class scores.

    Each class present in the labels is scored by the Mann-Whitney rank
    statistic of its column, which credits tied score pairs with 1/2. Classes
    absent from the labels are skipped.

    Args:
        scores: shape (n, num_classes), higher means more likely.
        labels: integer class per row.

    Raises:
        ValueError: fewer than two distinct label values.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if scores.ndim != 2 or scores.shape[0] != labels.shape[0]:
        raise ShapeError(f"scores shape {scores.shape} does not match {labels.shape[0]} labels")
    if np.unique(labels).size < 2:
        raise ValueError("macro_auc_ovr needs at least two distinct label values")
    aucs = []
    for cls in range(scores.shape[1]):
        pos = labels == cls
        n_pos = int(pos.sum())
        if n_pos == 0:
            continue
        n_neg = labels.size - n_pos
        ranks = rankdata(scores[:, cls], method="average")
        rank_sum = ranks[pos].sum()
        aucs.append((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
    return float(np.mean(aucs))


def evaluate_probs(probs: np.ndarray, labels) -> MetricsReport:
    """Full report from class probabilities; predictions are row argmax."""
    labels = np.asarray(labels, dtype=np.int64)
    preds = probs.argmax(axis=1)
    confusion = confusion_matrix(labels, preds, probs.shape[1])
    f1s = per_class_f1(confusion)
    return MetricsReport(
        accuracy=accuracy(labels, preds),
        macro_f1=float(f1s.mean()),
        macro_auc=macro_auc_ovr(probs, labels),
        per_class_f1=tuple(float(v) for v in f1s),
        confusion=confusion,
    )
