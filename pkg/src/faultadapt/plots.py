"""Matplotlib figures rendered next to the delimited outputs.

Every entry point writes a PNG to an explicit path using the Agg backend, so
report generation works the same on headless machines. Figures are a side
channel: the CSVs remain the machine-readable contract.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

METRICS = ("accuracy", "macro_f1", "macro_auc")


def _style(ax):
    ax.grid(True, alpha=0.3)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)


def save_history_figure(history, path) -> str:
    """Loss curves and accuracy/pseudo-count curves for one training run."""
    epochs = np.arange(1, len(history.records) + 1)
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(11, 4))

    for name, getter in (
        ("source CE", lambda r: r.breakdown.l_source),
        ("feature-mean gap", lambda r: r.breakdown.l_mmd),
        ("domain loss", lambda r: r.breakdown.l_adv),
        ("total", lambda r: r.breakdown.l_total),
    ):
        ax_loss.plot(epochs, [getter(r) for r in history.records], label=name)
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss")
    ax_loss.set_title("training losses")
    ax_loss.legend(fontsize=8)
    _style(ax_loss)

    ax_acc.plot(epochs, [r.source_accuracy for r in history.records], label="source acc")
    t_acc = [r.target_accuracy for r in history.records]
    if any(v is not None for v in t_acc):
        ax_acc.plot(
            epochs,
            [np.nan if v is None else v for v in t_acc],
            label="target acc (labeled rows)",
        )
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.set_ylim(0.0, 1.02)
    ax_acc.set_title("accuracy and pseudo-labels")
    _style(ax_acc)
    ax_count = ax_acc.twinx()
    ax_count.plot(
        epochs, [r.pseudo_label_count for r in history.records],
        color="tab:gray", linestyle=":", label="pseudo-labels",
    )
    ax_count.set_ylabel("pseudo-label pool size")
    handles, labels = ax_acc.get_legend_handles_labels()
    h2, l2 = ax_count.get_legend_handles_labels()
    ax_acc.legend(handles + h2, labels + l2, fontsize=8, loc="lower right")

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_confusion_figure(confusion: np.ndarray, path, class_names=None) -> str:
    """Heatmap of a confusion matrix with counts written into the cells."""
    k = confusion.shape[0]
    if class_names is None:
        class_names = [f"class {i}" for i in range(k)]
    fig, ax = plt.subplots(figsize=(1.0 + 0.8 * k, 0.8 + 0.8 * k))
    im = ax.imshow(confusion, cmap="Blues")
    threshold = confusion.max() / 2.0 if confusion.max() else 0.5
    for i in range(k):
        for j in range(k):
            ax.text(
                j, i, str(int(confusion[i, j])),
                ha="center", va="center", fontsize=8,
                color="white" if confusion[i, j] > threshold else "black",
            )
    ax.set_xticks(range(k), class_names, rotation=45, ha="right", fontsize=8)
    ax.set_yticks(range(k), class_names, fontsize=8)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_sweep_figures(agg_rows, out_dir, scenario: str) -> list[str]:
    """One figure per metric: mean with a std band per ablation across the axis.

    agg_rows are the aggregated experiment rows (dicts with axis_value,
    ablation and <metric>_mean / <metric>_std entries). A numeric axis gets
    error-bar lines; a categorical axis (node types) gets grouped bars.
    """
    ablations = sorted({r["ablation"] for r in agg_rows})
    axis_values = []
    for r in agg_rows:
        if r["axis_value"] not in axis_values:
            axis_values.append(r["axis_value"])
    try:
        positions = np.array([float(v) for v in axis_values])
        numeric = True
    except ValueError:
        positions = np.arange(len(axis_values), dtype=np.float64)
        numeric = False

    cell = {(r["axis_value"], r["ablation"]): r for r in agg_rows}
    written = []
    for metric in METRICS:
        fig, ax = plt.subplots(figsize=(6.5, 4))
        for a_i, ablation in enumerate(ablations):
            means, stds = [], []
            for v in axis_values:
                row = cell.get((v, ablation))
                means.append(np.nan if row is None else row[f"{metric}_mean"])
                stds.append(0.0 if row is None else row[f"{metric}_std"])
            means = np.asarray(means)
            stds = np.asarray(stds)
            if numeric:
                ax.errorbar(positions, means, yerr=stds, marker="o", capsize=3, label=ablation)
            else:
                width = 0.8 / len(ablations)
                offset = (a_i - (len(ablations) - 1) / 2.0) * width
                ax.bar(positions + offset, means, width=width, yerr=stds, capsize=3, label=ablation)
        if not numeric:
            ax.set_xticks(positions, axis_values, rotation=20, ha="right", fontsize=8)
        ax.set_xlabel(_axis_label(scenario))
        ax.set_ylabel(metric.replace("_", " "))
        ax.set_ylim(0.0, 1.02)
        ax.set_title(f"{scenario}: {metric.replace('_', ' ')}")
        ax.legend(fontsize=8)
        _style(ax)
        fig.tight_layout()
        path = f"{out_dir}/{scenario}_{metric}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def _axis_label(scenario: str) -> str:
    return {
        "label_scarcity": "fraction of labeled target rows",
        "class_imbalance": "target class imbalance ratio",
        "heterogeneous_nodes": "node type",
        "standard_shift": "label fraction",
        "zero_shift": "label fraction",
    }.get(scenario, "axis value")
