"""Checkpoint and history serialization.

Checkpoints are text files: a magic first line carrying the format version,
then a JSON body whose floats are hex encoded (float.hex round trips every
bit). Loading validates the magic and version before touching the body and
rebuilds every structure before returning, so a corrupt file raises and
leaves nothing half-constructed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .data import NormalizationStats
from .model import ArchSpec, ModelParams, _layer_dims
from .training import TrainConfig

MAGIC = "faultadapt-checkpoint"
FORMAT_VERSION = 1

HISTORY_COLUMNS = (
    "epoch",
    "l_source",
    "l_mmd",
    "l_adv",
    "l_total",
    "source_acc",
    "target_acc",
    "pseudo_count",
    "grl_coef",
)


class CheckpointError(ValueError):
    """Raised when a checkpoint file cannot be read as written."""


class CheckpointVersionError(CheckpointError):
    """Raised when the file's format version differs from this code's."""


@dataclass(frozen=True)
class Checkpoint:
    """Everything needed to reuse a trained model on new traces."""

    arch: ArchSpec
    params: ModelParams
    normalization: NormalizationStats | None = None
    train_config: TrainConfig | None = None


def _encode_vector(v: np.ndarray) -> list:
    return [float(x).hex() for x in v]


def _encode_matrix(m: np.ndarray) -> list:
    return [_encode_vector(row) for row in m]


def _decode_vector(data, what: str) -> np.ndarray:
    try:
        out = np.array([float.fromhex(x) for x in data], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise CheckpointError(f"cannot decode {what}: {exc}") from None
    if not np.all(np.isfinite(out)):
        raise CheckpointError(f"{what} contains non-finite values")
    return out


def _decode_matrix(data, what: str) -> np.ndarray:
    if not data or not isinstance(data, list):
        raise CheckpointError(f"{what} is not a matrix")
    rows = [_decode_vector(row, what) for row in data]
    widths = {r.size for r in rows}
    if len(widths) != 1:
        raise CheckpointError(f"{what} has ragged rows")
    return np.vstack(rows)


def save_model(path, checkpoint: Checkpoint) -> None:
    """Write a checkpoint as versioned text; bytes depend only on contents."""
    body = {
        "arch": asdict(checkpoint.arch),
        "train_config": (
            asdict(checkpoint.train_config) if checkpoint.train_config is not None else None
        ),
        "normalization": None,
        "params": {
            group: [
                {"w": _encode_matrix(w), "b": _encode_vector(b)}
                for w, b in getattr(checkpoint.params, group)
            ]
            for group in ("extractor", "classifier", "discriminator")
        },
    }
    if checkpoint.normalization is not None:
        body["normalization"] = {
            dom: {"mean": _encode_vector(mean), "std": _encode_vector(std)}
            for dom, (mean, std) in sorted(checkpoint.normalization.per_domain.items())
        }
    with open(path, "w") as fh:
        fh.write(f"{MAGIC} {FORMAT_VERSION}\n")
        fh.write(json.dumps(body, indent=1, sort_keys=True))
        fh.write("\n")


def load_model(path) -> Checkpoint:
    """Read a checkpoint, failing closed on any mismatch or corruption.

    Raises:
        CheckpointVersionError: right magic, wrong format version.
        CheckpointError: anything else wrong with the file.
    """
    with open(path) as fh:
        first = fh.readline().strip()
        rest = fh.read()
    parts = first.split()
    if len(parts) != 2 or parts[0] != MAGIC:
        raise CheckpointError(f"{path}: not a {MAGIC} file")
    try:
        version = int(parts[1])
    except ValueError:
        raise CheckpointError(f"{path}: malformed version {parts[1]!r}") from None
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format version {version}, this build reads {FORMAT_VERSION}"
        )
    try:
        body = json.loads(rest)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt body: {exc}") from None

    try:
        arch_dict = dict(body["arch"])
        arch_dict["extractor_hidden"] = tuple(arch_dict["extractor_hidden"])
        arch_dict["discriminator_hidden"] = tuple(arch_dict["discriminator_hidden"])
        arch = ArchSpec(**arch_dict)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: bad architecture record: {exc}") from None

    expected = dict(zip(("extractor", "classifier", "discriminator"), _layer_dims(arch)))
    groups = {}
    params_body = body.get("params")
    if not isinstance(params_body, dict):
        raise CheckpointError(f"{path}: missing params")
    for group, dims in expected.items():
        layers_body = params_body.get(group)
        if not isinstance(layers_body, list) or len(layers_body) != len(dims):
            raise CheckpointError(
                f"{path}: {group} should have {len(dims)} layers"
            )
        layers = []
        for i, (layer_body, (fan_in, fan_out)) in enumerate(zip(layers_body, dims)):
            w = _decode_matrix(layer_body.get("w"), f"{group} layer {i} weights")
            b = _decode_vector(layer_body.get("b"), f"{group} layer {i} bias")
            if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
                raise CheckpointError(
                    f"{path}: {group} layer {i} has shape {w.shape}, expected {(fan_in, fan_out)}"
                )
            layers.append((w, b))
        groups[group] = tuple(layers)
    params = ModelParams(**groups)

    normalization = None
    if body.get("normalization") is not None:
        per_domain = {}
        for dom, stats in body["normalization"].items():
            mean = _decode_vector(stats.get("mean"), f"{dom} normalization mean")
            std = _decode_vector(stats.get("std"), f"{dom} normalization std")
            if mean.shape != std.shape:
                raise CheckpointError(f"{path}: {dom} normalization shapes differ")
            per_domain[dom] = (mean, std)
        normalization = NormalizationStats(per_domain)

    train_config = None
    if body.get("train_config") is not None:
        try:
            train_config = TrainConfig(**body["train_config"])
        except (TypeError, ValueError) as exc:
            raise CheckpointError(f"{path}: bad train config: {exc}") from None
    return Checkpoint(arch=arch, params=params, normalization=normalization, train_config=train_config)


def _fmt(value: float) -> str:
    return f"{value:.9g}"


def write_history_csv(history, path) -> None:
    """Write per-epoch training records with fixed 9-significant-digit floats."""
    lines = [",".join(HISTORY_COLUMNS)]
    for i, rec in enumerate(history.records, start=1):
        b = rec.breakdown
        target_acc = "" if rec.target_accuracy is None else _fmt(rec.target_accuracy)
        lines.append(
            ",".join(
                [
                    str(i),
                    _fmt(b.l_source),
                    _fmt(b.l_mmd),
                    _fmt(b.l_adv),
                    _fmt(b.l_total),
                    _fmt(rec.source_accuracy),
                    target_acc,
                    str(rec.pseudo_label_count),
                    _fmt(rec.grl_coefficient),
                ]
            )
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def read_history_csv(path):
    """Parse a history CSV back into row dicts (ints for counts, None for blanks)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != ",".join(HISTORY_COLUMNS):
        raise ValueError(f"{path}: unexpected history header")
    rows = []
    for ln in lines[1:]:
        row = {}
        for name, cell in zip(HISTORY_COLUMNS, ln.split(",")):
            if cell == "":
                row[name] = None
            elif name in ("epoch", "pseudo_count"):
                row[name] = int(cell)
            else:
                row[name] = float(cell)
        rows.append(row)
    return rows
