"""Typed INI parsing for train configs, scenario specs and experiment plans.

One flat format everywhere: named sections of key = value pairs, hash
comments allowed. Unknown sections or keys are errors so typos fail loudly
instead of silently training with defaults.
"""

from __future__ import annotations

import configparser
from dataclasses import fields

from .data import ScenarioSpec, standard_scenario
from .model import ArchSpec
from .training import TrainConfig


class ConfigFileError(ValueError):
    """Raised for unreadable or ill-typed configuration files."""


_MODEL_KEYS = (
    "extractor_hidden",
    "feature_dim",
    "discriminator_hidden",
    "extractor_activation",
    "discriminator_activation",
)
_DATA_KEYS = ("normalization",)
_PLAN_KEYS = ("scenario", "axis_values", "seeds", "ablations", "holdout_fraction")

_TRAIN_FIELDS = {f.name for f in fields(TrainConfig)}
_TRAIN_INT_KEYS = {
    "batch_size",
    "epochs",
    "pseudo_label_warmup_epochs",
    "pseudo_label_class_cap",
    "seed",
}
_SCENARIO_FIELDS = {f.name for f in fields(ScenarioSpec)}


def _read(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigFileError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigFileError(f"cannot parse config {path}: {exc}") from None
    return parser


def _check_keys(path, parser, allowed_by_section):
    for section in parser.sections():
        if section not in allowed_by_section:
            raise ConfigFileError(
                f"{path}: unknown section [{section}]; expected one of "
                + ", ".join(sorted(allowed_by_section))
            )
        allowed = allowed_by_section[section]
        for key in parser[section]:
            if key not in allowed:
                raise ConfigFileError(f"{path}: unknown key {key!r} in [{section}]")


def _parse_scalar(path, section, key, raw, kind):
    try:
        if kind is bool:
            lowered = raw.strip().lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return kind(raw)
    except ValueError as exc:
        raise ConfigFileError(f"{path}: [{section}] {key}: {exc}") from None


def _int_list(path, section, key, raw) -> tuple[int, ...]:
    return tuple(
        _parse_scalar(path, section, key, part.strip(), int)
        for part in raw.split(",") if part.strip()
    )


def _typed_pairs(path, section, key, raw, kind) -> tuple:
    pairs = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise ConfigFileError(
                f"{path}: [{section}] {key}: expected name:value pairs, got {part!r}"
            )
        name, value = part.split(":", 1)
        pairs.append((name.strip(), _parse_scalar(path, section, key, value.strip(), kind)))
    return tuple(pairs)


def parse_train_section(path, parser) -> dict:
    """[train] keys mapped onto TrainConfig fields."""
    out = {}
    if not parser.has_section("train"):
        return out
    for key, raw in parser["train"].items():
        kind = int if key in _TRAIN_INT_KEYS else float
        out[key] = _parse_scalar(path, "train", key, raw, kind)
    return out


def parse_model_section(path, parser) -> dict:
    """[model] keys mapped onto ArchSpec fields (dims come from the data)."""
    out = {}
    if not parser.has_section("model"):
        return out
    section = parser["model"]
    for key, raw in section.items():
        if key in ("extractor_hidden", "discriminator_hidden"):
            out[key] = _int_list(path, "model", key, raw)
        elif key == "feature_dim":
            out[key] = _parse_scalar(path, "model", key, raw, int)
        else:
            out[key] = raw.strip()
    return out


def parse_scenario_section(path, parser, section="scenario") -> dict:
    """[scenario] keys mapped onto ScenarioSpec fields."""
    out = {}
    if not parser.has_section(section):
        return out
    for key, raw in parser[section].items():
        if key in ("node_type_mix", "node_type_shift_scale"):
            out[key] = _typed_pairs(path, section, key, raw, float)
        elif key == "kind":
            out[key] = raw.strip()
        elif key in ("num_classes", "feature_dim", "source_samples", "target_samples", "seed"):
            out[key] = _parse_scalar(path, section, key, raw, int)
        elif key == "imbalance_in_source":
            out[key] = _parse_scalar(path, section, key, raw, bool)
        else:
            out[key] = _parse_scalar(path, section, key, raw, float)
    return out


def load_train_settings(path):
    """Read a train config file.

    Returns:
        (train_kwargs, model_kwargs, data_options) where data_options holds
        the normalization mode ('per-domain' or 'source-only').
    """
    parser = _read(path)
    _check_keys(
        path,
        parser,
        {
            "train": set(_TRAIN_FIELDS),
            "model": set(_MODEL_KEYS),
            "data": set(_DATA_KEYS),
        },
    )
    train_kwargs = parse_train_section(path, parser)
    model_kwargs = parse_model_section(path, parser)
    data_options = {"normalization": "per-domain"}
    if parser.has_section("data"):
        mode = parser["data"].get("normalization", "per-domain").strip()
        if mode not in ("per-domain", "source-only"):
            raise ConfigFileError(
                f"{path}: [data] normalization must be per-domain or source-only, got {mode!r}"
            )
        data_options["normalization"] = mode
    return train_kwargs, model_kwargs, data_options


def load_scenario_spec(path, kind=None, seed=None) -> ScenarioSpec:
    """Read a scenario spec file; kind/seed arguments override file values."""
    parser = _read(path)
    _check_keys(path, parser, {"scenario": _SCENARIO_FIELDS})
    kwargs = parse_scenario_section(path, parser)
    if kind is not None:
        kwargs["kind"] = kind
    if seed is not None:
        kwargs["seed"] = seed
    file_kind = kwargs.pop("kind", "standard_shift")
    file_seed = kwargs.pop("seed", 0)
    try:
        return standard_scenario(file_kind, file_seed, **kwargs)
    except ValueError as exc:
        raise ConfigFileError(f"{path}: {exc}") from None


def build_arch(input_dim: int, num_classes: int, model_kwargs: dict) -> ArchSpec:
    """ArchSpec from data-derived dimensions plus [model] overrides."""
    try:
        return ArchSpec(input_dim=input_dim, num_classes=num_classes, **model_kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigFileError(f"invalid model settings: {exc}") from None
