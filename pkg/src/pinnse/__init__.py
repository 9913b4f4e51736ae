"""Physics-informed neural network state estimation on small transmission grids."""

__version__ = "0.1.0"

from pinnse.dataset import (
    Dataset,
    DatasetError,
    NoiseSpec,
    PreprocessStats,
    Sample,
    Scenario,
    add_noise,
    generate_outage_trajectory,
    generate_steady_state,
    k_fold_split,
    load_dataset,
    preprocess,
    save_dataset,
)
from pinnse.grid import (
    AdmittanceMatrix,
    Branch,
    Bus,
    BusKind,
    GridModel,
    GridModelError,
    build_admittance,
    load_case,
    load_case14,
    parse_case,
)
from pinnse.loss import (
    LambdaSchedule,
    LossParts,
    Regime,
    combine,
    data_loss,
    evaluate_losses,
    physics_loss,
    schedule_lambdas,
)
from pinnse.network import (
    MLP,
    AdamState,
    Gradients,
    NonFiniteLossError,
    adam_step,
    backward,
    forward,
    init_mlp,
    load_checkpoint,
    save_checkpoint,
)
from pinnse.power_flow import (
    CurrentSet,
    InjectionSet,
    PolarVoltage,
    PowerFlowError,
    current_injections,
    flat_profile,
    injection_jacobian,
    injections,
    solve_newton_raphson,
)
from pinnse.training import (
    ExperimentConfig,
    FoldReport,
    RegimeReport,
    TrainingError,
    compare_regimes,
    cross_validate,
    report_json,
    report_text,
    train_fold,
    validation_error,
)
from pinnse.wls import (
    MeasurementSet,
    WLSBatchResult,
    WLSError,
    estimate_wls,
    measurement_weights,
    save_wls_estimates,
    save_wls_stats,
    wls_batch,
)

__all__ = [
    "AdamState",
    "AdmittanceMatrix",
    "Branch",
    "Bus",
    "BusKind",
    "CurrentSet",
    "Dataset",
    "DatasetError",
    "ExperimentConfig",
    "FoldReport",
    "Gradients",
    "GridModel",
    "GridModelError",
    "InjectionSet",
    "LambdaSchedule",
    "LossParts",
    "MLP",
    "MeasurementSet",
    "NoiseSpec",
    "NonFiniteLossError",
    "PolarVoltage",
    "PowerFlowError",
    "PreprocessStats",
    "Regime",
    "RegimeReport",
    "Sample",
    "Scenario",
    "TrainingError",
    "WLSBatchResult",
    "WLSError",
    "add_noise",
    "adam_step",
    "backward",
    "build_admittance",
    "combine",
    "compare_regimes",
    "cross_validate",
    "current_injections",
    "data_loss",
    "estimate_wls",
    "evaluate_losses",
    "flat_profile",
    "forward",
    "generate_outage_trajectory",
    "generate_steady_state",
    "init_mlp",
    "injection_jacobian",
    "injections",
    "k_fold_split",
    "load_case",
    "load_case14",
    "load_checkpoint",
    "load_dataset",
    "measurement_weights",
    "parse_case",
    "physics_loss",
    "preprocess",
    "report_json",
    "report_text",
    "save_checkpoint",
    "save_dataset",
    "save_wls_estimates",
    "save_wls_stats",
    "schedule_lambdas",
    "solve_newton_raphson",
    "train_fold",
    "validation_error",
    "wls_batch",
]
