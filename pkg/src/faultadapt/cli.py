"""Command line interface.

Subcommands: generate synthetic scenario traces, train an adapted model from
source/target trace CSVs, evaluate or predict with a saved checkpoint, and
run experiment plans. Report-producing paths write matplotlib figures next
to their CSV outputs unless --no-figures is passed.

The FAULTADAPT_OUT_DIR environment variable, when set, overrides the --out
directory of the generate and experiment subcommands.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import plots
from .configfile import build_arch, load_scenario_spec, load_train_settings
from .data import (
    SCENARIO_KINDS,
    NormalizationStats,
    apply_normalization,
    compute_normalization,
    generate_scenario,
    load_trace_csv,
    standard_scenario,
    write_trace_csv,
)
from .experiment import load_plan, run_experiment
from .metrics import evaluate_probs
from .model import classify, extract_features, predict
from .persistence import (
    Checkpoint,
    load_model,
    save_model,
    write_history_csv,
)
from .training import TrainConfig, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faultadapt",
        description="Cross-domain fault root-cause classification on tabular telemetry.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a source/target trace pair")
    p.add_argument("--scenario", choices=SCENARIO_KINDS, default=None,
                   help="scenario kind (default: standard_shift, or the kind set in --spec)")
    p.add_argument("--spec", default=None, help="scenario spec file (INI)")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out", required=True, help="output directory for source.csv/target.csv")

    p = sub.add_parser("train", help="train an adapted classifier from trace CSVs")
    p.add_argument("--source", required=True, help="labeled source-domain trace CSV")
    p.add_argument("--target", required=True, help="target-domain trace CSV")
    p.add_argument("--config", default=None, help="train config file (INI)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--normalization", choices=("per-domain", "source-only"), default=None,
                   help="z-score statistics mode (default from config, else per-domain)")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--history", default=None,
                   help="history CSV path (default: <out>.history.csv)")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    p = sub.add_parser("eval", help="score a checkpoint against a labeled trace CSV")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="labeled trace CSV")
    p.add_argument("--report", required=True, help="metrics report CSV path")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    p = sub.add_parser("predict", help="emit per-row class and confidence")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="trace CSV")
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")

    p = sub.add_parser("experiment", help="run an experiment plan")
    p.add_argument("--plan", required=True, help="experiment plan file (INI)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    return parser


def _out_dir(requested: str) -> str:
    return os.environ.get("FAULTADAPT_OUT_DIR", requested)


def _cmd_generate(args) -> int:
    if args.spec is not None:
        spec = load_scenario_spec(args.spec, kind=args.scenario, seed=args.seed)
    else:
        spec = standard_scenario(args.scenario or "standard_shift", args.seed or 0)
    source, target = generate_scenario(spec)
    out_dir = _out_dir(args.out)
    os.makedirs(out_dir, exist_ok=True)
    source_path = os.path.join(out_dir, "source.csv")
    target_path = os.path.join(out_dir, "target.csv")
    write_trace_csv(source, source_path)
    write_trace_csv(target, target_path)
    print(f"wrote {source_path} ({len(source)} rows)")
    print(f"wrote {target_path} ({len(target)} rows, "
          f"{int(target.labeled_mask().sum())} labeled)")
    return 0


def _load_pair(source_path: str, target_path: str):
    source = load_trace_csv(source_path, default_domain="source")
    target = load_trace_csv(target_path, default_domain="target")
    # The file's role on the command line wins over any domain column.
    source = replace(source, domains=np.full(len(source), "source"))
    target = replace(target, domains=np.full(len(target), "target"))
    if source.feature_names != target.feature_names:
        raise ValueError(
            f"feature columns differ between {source_path} and {target_path}"
        )
    class_count = max(source.class_count, target.class_count)
    return (
        replace(source, class_count=class_count),
        replace(target, class_count=class_count),
    )


def _cmd_train(args) -> int:
    train_kwargs, model_kwargs, data_options = (
        load_train_settings(args.config) if args.config else ({}, {}, {"normalization": "per-domain"})
    )
    if args.seed is not None:
        train_kwargs["seed"] = args.seed
    config = TrainConfig(**train_kwargs)
    mode = args.normalization or data_options["normalization"]

    source, target = _load_pair(args.source, args.target)
    if source.class_count < 2:
        raise ValueError("source trace needs labels from at least two classes")

    if mode == "source-only":
        src_stats = compute_normalization(source).per_domain["source"]
        stats = NormalizationStats({"source": src_stats, "target": src_stats})
    else:
        stats = NormalizationStats(
            {
                "source": compute_normalization(source).per_domain["source"],
                "target": compute_normalization(target).per_domain["target"],
            }
        )
    source_n = apply_normalization(source, stats)
    target_n = apply_normalization(target, stats)

    arch = build_arch(source.feature_dim, source.class_count, model_kwargs)
    params, history = train(source_n, target_n, arch, config)

    save_model(args.out, Checkpoint(arch, params, stats, config))
    history_path = args.history or f"{args.out}.history.csv"
    write_history_csv(history, history_path)
    print(f"wrote {args.out}")
    print(f"wrote {history_path}")
    if not args.no_figures:
        figure_path = f"{os.path.splitext(history_path)[0]}.png"
        plots.save_history_figure(history, figure_path)
        print(f"wrote {figure_path}")
    last = history.records[-1]
    target_part = (
        f" target_acc={last.target_accuracy:.3f}" if last.target_accuracy is not None else ""
    )
    print(
        f"final epoch: l_total={last.breakdown.l_total:.4f} "
        f"source_acc={last.source_accuracy:.3f}{target_part} "
        f"pseudo_labels={last.pseudo_label_count}"
    )
    return 0


def _load_for_inference(model_path: str, data_path: str):
    checkpoint = load_model(model_path)
    data = load_trace_csv(data_path, default_domain="target")
    if data.feature_dim != checkpoint.arch.input_dim:
        raise ValueError(
            f"{data_path} has {data.feature_dim} feature columns, "
            f"model expects {checkpoint.arch.input_dim}"
        )
    if checkpoint.normalization is not None:
        data = apply_normalization(data, checkpoint.normalization)
    return checkpoint, data


def _cmd_eval(args) -> int:
    checkpoint, data = _load_for_inference(args.model, args.data)
    labeled = np.flatnonzero(data.labeled_mask())
    if labeled.size == 0:
        raise ValueError(f"{args.data} has no labeled rows to evaluate against")
    subset = data.subset(labeled)
    probs = classify(
        extract_features(subset.features, checkpoint.arch, checkpoint.params),
        checkpoint.arch,
        checkpoint.params,
    )
    report = evaluate_probs(probs, subset.labels)

    lines = ["metric,value"]
    lines.append(f"accuracy,{report.accuracy:.9g}")
    lines.append(f"macro_f1,{report.macro_f1:.9g}")
    lines.append(f"macro_auc,{report.macro_auc:.9g}")
    for cls, f1 in enumerate(report.per_class_f1):
        lines.append(f"f1_class_{cls},{f1:.9g}")
    k = report.confusion.shape[0]
    for i in range(k):
        for j in range(k):
            lines.append(f"confusion_{i}_{j},{int(report.confusion[i, j])}")
    with open(args.report, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {args.report}")
    if not args.no_figures:
        figure_path = f"{os.path.splitext(args.report)[0]}_confusion.png"
        plots.save_confusion_figure(report.confusion, figure_path)
        print(f"wrote {figure_path}")
    print(
        f"accuracy={report.accuracy:.4f} macro_f1={report.macro_f1:.4f} "
        f"macro_auc={report.macro_auc:.4f} on {labeled.size} rows"
    )
    return 0


def _cmd_predict(args) -> int:
    checkpoint, data = _load_for_inference(args.model, args.data)
    labels, confidence = predict(data.features, checkpoint.arch, checkpoint.params)
    lines = ["row,predicted_class,confidence"]
    for i, (cls, conf) in enumerate(zip(labels, confidence), start=1):
        lines.append(f"{i},{int(cls)},{conf:.9g}")
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    return 0


def _cmd_experiment(args) -> int:
    plan = load_plan(args.plan)
    out_dir = _out_dir(args.out)
    rows, agg = run_experiment(
        plan,
        out_dir=out_dir,
        render_figures=not args.no_figures,
        log=lambda msg: print(msg, file=sys.stderr),
    )
    print(f"wrote {os.path.join(out_dir, 'summary.csv')} ({len(rows)} rows)")
    print(f"wrote {os.path.join(out_dir, 'summary_agg.csv')} ({len(agg)} rows)")
    if not args.no_figures:
        for metric in plots.METRICS:
            print(f"wrote {os.path.join(out_dir, f'{plan.scenario}_{metric}.png')}")
    for row in agg:
        print(
            f"{row['scenario']} axis={row['axis_value']} {row['ablation']}: "
            f"accuracy={row['accuracy_mean']:.3f}+/-{row['accuracy_std']:.3f} "
            f"macro_f1={row['macro_f1_mean']:.3f}"
        )
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "predict": _cmd_predict,
    "experiment": _cmd_experiment,
}


def run(argv) -> int:
    """Parse argv (without the program name) and execute one subcommand.

    Returns 0 on success and 1 on any reported failure; argparse itself
    exits with 2 on usage errors.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
