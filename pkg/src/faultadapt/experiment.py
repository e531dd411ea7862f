"""Experiment harness: scenario sweeps over seeds and ablations.

Each cell of a plan synthesizes a scenario, holds out labeled target rows for
evaluation, trains one model variant and scores it. Rows stream into
summary.csv as cells finish, so a failing cell leaves every completed row
behind; aggregates and figures are produced only when the whole plan ran.

Evaluation discipline: 30% of the target rows (configurable) are split off
before label masking and are never seen by training or pseudo-labeling; all
reported metrics come from that holdout.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from . import plots
from .configfile import (
    ConfigFileError,
    _check_keys,
    _parse_scalar,
    _read,
    _PLAN_KEYS,
    _MODEL_KEYS,
    _SCENARIO_FIELDS,
    _TRAIN_FIELDS,
    build_arch,
    parse_model_section,
    parse_scenario_section,
    parse_train_section,
)
from .data import (
    Dataset,
    NormalizationStats,
    ScenarioSpec,
    apply_normalization,
    compute_normalization,
    generate_scenario,
    mask_labels,
    split_holdout,
    standard_scenario,
)
from .metrics import evaluate_probs
from .model import classify, extract_features
from .training import TrainConfig, train, train_source_only

ABLATIONS = ("full", "source_only", "mmd_only", "adv_only", "no_pseudo")

SUMMARY_COLUMNS = ("scenario", "axis_value", "seed", "ablation", "accuracy", "macro_f1", "macro_auc")
AGG_COLUMNS = (
    "scenario",
    "axis_value",
    "ablation",
    "n_seeds",
    "accuracy_mean",
    "accuracy_std",
    "macro_f1_mean",
    "macro_f1_std",
    "macro_auc_mean",
    "macro_auc_std",
)


class ExperimentError(RuntimeError):
    """A plan cell failed; the message names the cell."""


@dataclass(frozen=True)
class ExperimentPlan:
    """A sweep: scenario kind, axis values, seeds and model ablations.

    The axis meaning depends on the scenario: the labeled fraction for
    label_scarcity (and the shift scenarios), the target imbalance ratio for
    class_imbalance, and the node type for heterogeneous_nodes.
    """

    scenario: str
    axis_values: tuple
    seeds: tuple[int, ...] = (0,)
    ablations: tuple[str, ...] = ("full",)
    scenario_overrides: tuple[tuple[str, object], ...] = ()
    train_overrides: tuple[tuple[str, object], ...] = ()
    model_overrides: tuple[tuple[str, object], ...] = ()
    holdout_fraction: float = 0.3

    def __post_init__(self):
        if not self.axis_values:
            raise ValueError("plan needs at least one axis value")
        if not self.seeds:
            raise ValueError("plan needs at least one seed")
        for ablation in self.ablations:
            if ablation not in ABLATIONS:
                raise ValueError(
                    f"unknown ablation {ablation!r}; choose from {', '.join(ABLATIONS)}"
                )
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in (0, 1)")

    def base_spec(self, seed: int) -> ScenarioSpec:
        return standard_scenario(self.scenario, seed, **dict(self.scenario_overrides))

    def base_config(self, seed: int) -> TrainConfig:
        return TrainConfig(seed=seed, **dict(self.train_overrides))


def load_plan(path) -> ExperimentPlan:
    """Read an experiment plan file ([plan] plus optional [scenario]/[train]/[model])."""
    parser = _read(path)
    _check_keys(
        path,
        parser,
        {
            "plan": set(_PLAN_KEYS),
            "scenario": _SCENARIO_FIELDS - {"kind", "seed", "label_fraction", "imbalance_ratio"},
            "train": set(_TRAIN_FIELDS) - {"seed"},
            "model": set(_MODEL_KEYS),
        },
    )
    if not parser.has_section("plan"):
        raise ConfigFileError(f"{path}: missing [plan] section")
    plan_sec = parser["plan"]
    if "scenario" not in plan_sec:
        raise ConfigFileError(f"{path}: [plan] needs a scenario")
    scenario = plan_sec["scenario"].strip()

    if "axis_values" in plan_sec:
        raw_axis = [p.strip() for p in plan_sec["axis_values"].split(",") if p.strip()]
        if scenario == "heterogeneous_nodes":
            axis_values = tuple(raw_axis)
        else:
            axis_values = tuple(
                _parse_scalar(path, "plan", "axis_values", p, float) for p in raw_axis
            )
    elif scenario == "heterogeneous_nodes":
        axis_values = ()  # filled from the node type mix below
    else:
        raise ConfigFileError(f"{path}: [plan] needs axis_values for {scenario}")

    seeds = (0,)
    if "seeds" in plan_sec:
        seeds = tuple(
            _parse_scalar(path, "plan", "seeds", p.strip(), int)
            for p in plan_sec["seeds"].split(",") if p.strip()
        )
    ablations = ("full",)
    if "ablations" in plan_sec:
        ablations = tuple(p.strip() for p in plan_sec["ablations"].split(",") if p.strip())
    holdout = 0.3
    if "holdout_fraction" in plan_sec:
        holdout = _parse_scalar(path, "plan", "holdout_fraction", plan_sec["holdout_fraction"], float)

    scenario_overrides = tuple(sorted(parse_scenario_section(path, parser).items()))
    train_overrides = tuple(sorted(parse_train_section(path, parser).items()))
    model_overrides = tuple(sorted(parse_model_section(path, parser).items()))

    if scenario == "heterogeneous_nodes" and not axis_values:
        spec = standard_scenario(scenario, 0, **dict(scenario_overrides))
        axis_values = tuple(t for t, _ in spec.node_type_mix)

    try:
        return ExperimentPlan(
            scenario=scenario,
            axis_values=axis_values,
            seeds=seeds,
            ablations=ablations,
            scenario_overrides=scenario_overrides,
            train_overrides=train_overrides,
            model_overrides=model_overrides,
            holdout_fraction=holdout,
        )
    except ValueError as exc:
        raise ConfigFileError(f"{path}: {exc}") from None


def ablation_config(base: TrainConfig, ablation: str) -> TrainConfig:
    """Disable objective components according to the ablation name.

    Pseudo-labeling is switched off by raising the confidence threshold to
    1.0, which clamped probabilities can never reach.
    """
    if ablation == "full":
        return base
    if ablation == "source_only":
        return replace(
            base, mmd_weight=0.0, adversarial_weight=0.0, pseudo_label_threshold=1.0
        )
    if ablation == "mmd_only":
        return replace(base, adversarial_weight=0.0, pseudo_label_threshold=1.0)
    if ablation == "adv_only":
        return replace(base, mmd_weight=0.0, pseudo_label_threshold=1.0)
    if ablation == "no_pseudo":
        return replace(base, pseudo_label_threshold=1.0)
    raise ValueError(f"unknown ablation {ablation!r}")


def _axis_spec(plan: ExperimentPlan, axis_value, seed: int) -> ScenarioSpec:
    spec = plan.base_spec(seed)
    if plan.scenario == "class_imbalance":
        return replace(spec, imbalance_ratio=float(axis_value))
    if plan.scenario == "heterogeneous_nodes":
        return spec
    return replace(spec, label_fraction=float(axis_value))


def prepare_cell_data(spec: ScenarioSpec, holdout_fraction: float, seed: int):
    """Generate, split, mask and normalize one cell's datasets.

    Returns:
        (source, target_train, holdout, stats) with all three datasets
        normalized; holdout rows are z-scored with the target training
        stats, never their own.
    """
    source, target_full = generate_scenario(replace(spec, label_fraction=1.0))
    target_train, holdout = split_holdout(target_full, holdout_fraction, seed)
    if spec.label_fraction < 1.0:
        target_train = mask_labels(target_train, spec.label_fraction, seed)
    stats = NormalizationStats(
        {
            "source": compute_normalization(source).per_domain["source"],
            "target": compute_normalization(target_train).per_domain["target"],
        }
    )
    return (
        apply_normalization(source, stats),
        apply_normalization(target_train, stats),
        apply_normalization(holdout, stats),
        stats,
    )


def _evaluate(holdout: Dataset, arch, params):
    probs = classify(extract_features(holdout.features, arch, params), arch, params)
    return evaluate_probs(probs, holdout.labels)


def _train_variant(source, target_train, arch, config, ablation):
    if ablation == "source_only":
        return train_source_only(source, target_train, arch, config)
    return train(source, target_train, arch, ablation_config(config, ablation))


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def run_experiment(plan: ExperimentPlan, out_dir=None, render_figures=True, log=None):
    """Run every cell of a plan.

    Args:
        plan: what to sweep.
        out_dir: when given, summary.csv (streamed), summary_agg.csv and the
            sweep figures are written there.
        render_figures: disable to skip PNG rendering.
        log: optional callable taking one progress string per cell.

    Returns:
        (rows, agg_rows): per-cell and per-(axis, ablation) aggregate dicts.

    Raises:
        ExperimentError: a cell failed; completed rows are already on disk.
    """
    rows: list[dict] = []
    writer = None
    summary_path = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        summary_path = os.path.join(out_dir, "summary.csv")
        writer = open(summary_path, "w", newline="")
        writer.write(",".join(SUMMARY_COLUMNS) + "\n")
        writer.flush()

    def emit(row: dict):
        rows.append(row)
        if writer is not None:
            writer.write(",".join(_fmt(row[c]) for c in SUMMARY_COLUMNS) + "\n")
            writer.flush()

    try:
        if plan.scenario == "heterogeneous_nodes":
            _run_heterogeneous(plan, emit, log)
        else:
            _run_swept(plan, emit, log)
    finally:
        if writer is not None:
            writer.close()

    agg_rows = aggregate_rows(rows)
    if out_dir is not None:
        agg_path = os.path.join(out_dir, "summary_agg.csv")
        with open(agg_path, "w", newline="") as fh:
            fh.write(",".join(AGG_COLUMNS) + "\n")
            for row in agg_rows:
                fh.write(",".join(_fmt(row[c]) for c in AGG_COLUMNS) + "\n")
        if render_figures:
            plots.save_sweep_figures(agg_rows, out_dir, plan.scenario)
    return rows, agg_rows


def _run_swept(plan: ExperimentPlan, emit, log):
    for axis_value in plan.axis_values:
        for seed in plan.seeds:
            for ablation in plan.ablations:
                cell = f"axis={_fmt(axis_value)} seed={seed} ablation={ablation}"
                try:
                    spec = _axis_spec(plan, axis_value, seed)
                    source, target_train, holdout, _ = prepare_cell_data(
                        spec, plan.holdout_fraction, seed
                    )
                    arch = build_arch(
                        spec.feature_dim, spec.num_classes, dict(plan.model_overrides)
                    )
                    params, _ = _train_variant(
                        source, target_train, arch, plan.base_config(seed), ablation
                    )
                    report = _evaluate(holdout, arch, params)
                except Exception as exc:
                    raise ExperimentError(f"cell {cell} failed: {exc}") from exc
                if log is not None:
                    log(f"{plan.scenario} {cell}: accuracy={report.accuracy:.3f}")
                emit(
                    {
                        "scenario": plan.scenario,
                        "axis_value": _fmt(axis_value),
                        "seed": seed,
                        "ablation": ablation,
                        "accuracy": report.accuracy,
                        "macro_f1": report.macro_f1,
                        "macro_auc": report.macro_auc,
                    }
                )


def _run_heterogeneous(plan: ExperimentPlan, emit, log):
    for seed in plan.seeds:
        for ablation in plan.ablations:
            cell = f"seed={seed} ablation={ablation}"
            try:
                spec = plan.base_spec(seed)
                known_types = {t for t, _ in spec.node_type_mix}
                missing = [t for t in plan.axis_values if t not in known_types]
                if missing:
                    raise ValueError(
                        f"axis node types {missing} not present in the scenario mix"
                    )
                source, target_train, holdout, _ = prepare_cell_data(
                    spec, plan.holdout_fraction, seed
                )
                arch = build_arch(
                    spec.feature_dim, spec.num_classes, dict(plan.model_overrides)
                )
                params, _ = _train_variant(
                    source, target_train, arch, plan.base_config(seed), ablation
                )
            except ExperimentError:
                raise
            except Exception as exc:
                raise ExperimentError(f"cell {cell} failed: {exc}") from exc
            for node_type in plan.axis_values:
                mask = holdout.node_types == node_type
                try:
                    if not np.any(mask):
                        raise ValueError(f"holdout has no rows of node type {node_type!r}")
                    report = _evaluate(holdout.subset(np.flatnonzero(mask)), arch, params)
                except Exception as exc:
                    raise ExperimentError(
                        f"cell {cell} axis={node_type} failed: {exc}"
                    ) from exc
                if log is not None:
                    log(f"{plan.scenario} {cell} {node_type}: accuracy={report.accuracy:.3f}")
                emit(
                    {
                        "scenario": plan.scenario,
                        "axis_value": node_type,
                        "seed": seed,
                        "ablation": ablation,
                        "accuracy": report.accuracy,
                        "macro_f1": report.macro_f1,
                        "macro_auc": report.macro_auc,
                    }
                )


def aggregate_rows(rows) -> list[dict]:
    """Mean and population std per (scenario, axis_value, ablation) cell."""
    order = []
    groups = {}
    for row in rows:
        key = (row["scenario"], row["axis_value"], row["ablation"])
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    agg = []
    for key in order:
        members = groups[key]
        entry = {
            "scenario": key[0],
            "axis_value": key[1],
            "ablation": key[2],
            "n_seeds": len(members),
        }
        for metric in ("accuracy", "macro_f1", "macro_auc"):
            values = np.array([m[metric] for m in members], dtype=np.float64)
            entry[f"{metric}_mean"] = float(values.mean())
            entry[f"{metric}_std"] = float(values.std())
        agg.append(entry)
    return agg
