"""Cross-domain fault root-cause classification for tabular telemetry.

A shared feature extractor is trained jointly on a labeled source domain and
a scarcely labeled target domain. Three signals shape it: supervised
cross-entropy, alignment of batch feature means across domains, and a domain
discriminator whose gradient is reversed on its way into the extractor.
Confident target predictions are recycled as pseudo-labels after a warmup.
"""

from .data import (
    Dataset,
    NormalizationStats,
    Sample,
    ScenarioSpec,
    TraceFormatError,
    apply_normalization,
    compute_normalization,
    generate_scenario,
    load_trace_csv,
    make_dataset,
    mask_labels,
    split_holdout,
    standard_scenario,
    write_trace_csv,
    zscore_normalize,
)
from .experiment import ExperimentPlan, aggregate_rows, load_plan, run_experiment
from .losses import LossBreakdown, domain_adversarial_loss, mmd_loss, source_loss, total_loss
from .metrics import (
    MetricsReport,
    accuracy,
    confusion_matrix,
    evaluate_probs,
    macro_auc_ovr,
    macro_f1,
)
from .model import (
    ArchSpec,
    ModelParams,
    classify,
    discriminate,
    extract_features,
    init_params,
    predict,
)
from .persistence import (
    Checkpoint,
    CheckpointError,
    CheckpointVersionError,
    load_model,
    save_model,
    write_history_csv,
)
from .training import (
    NonFiniteLossError,
    PseudoLabel,
    TrainConfig,
    TrainHistory,
    grl_coefficient,
    select_pseudo_labels,
    sgd_momentum_step,
    train,
    train_source_only,
)

__version__ = "0.1.0"

__all__ = [
    "ArchSpec",
    "Checkpoint",
    "CheckpointError",
    "CheckpointVersionError",
    "Dataset",
    "ExperimentPlan",
    "LossBreakdown",
    "MetricsReport",
    "ModelParams",
    "NonFiniteLossError",
    "NormalizationStats",
    "PseudoLabel",
    "Sample",
    "ScenarioSpec",
    "TraceFormatError",
    "TrainConfig",
    "TrainHistory",
    "accuracy",
    "aggregate_rows",
    "apply_normalization",
    "classify",
    "compute_normalization",
    "confusion_matrix",
    "discriminate",
    "evaluate_probs",
    "extract_features",
    "generate_scenario",
    "grl_coefficient",
    "init_params",
    "load_model",
    "load_plan",
    "load_trace_csv",
    "macro_auc_ovr",
    "macro_f1",
    "make_dataset",
    "mask_labels",
    "mmd_loss",
    "predict",
    "run_experiment",
    "save_model",
    "select_pseudo_labels",
    "sgd_momentum_step",
    "source_loss",
    "split_holdout",
    "standard_scenario",
    "domain_adversarial_loss",
    "total_loss",
    "train",
    "train_source_only",
    "write_history_csv",
    "write_trace_csv",
    "zscore_normalize",
]
