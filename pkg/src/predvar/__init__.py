"""Reduced-dimensional VAR modeling with oblique signal/noise projections."""

from . import exceptions
from .baselines import fit_oneshot, fit_orth
from .estimation import (
    FitConfig,
    FitResult,
    Scaling,
    StackedData,
    build_stacks,
    constrained_weights,
    dlv_objective,
    extract_dlvs,
    fit_oblique,
    fit_predvar,
    init_weights,
    lag_coeffs,
    proj_objective,
    update_dynamics,
    update_loadings,
)
from .estimators import PredVAR
from .lorenz import (
    LorenzConfig,
    SyntheticDataset,
    integrate_lorenz,
    model_case_study,
    orth_case_study,
    paper_case_study,
)
from .metrics import (
    EvalReport,
    SweepCell,
    consistency_sweep,
    em_signal_prediction_cov,
    evaluate_fit,
    projector_distance,
    residual_covariances,
    sensor_traces,
    signal_subspace_angle,
    truth_result,
)
from .model import (
    PredVarParams,
    ReducedRankVar,
    WeightMatrices,
    dual_weights,
    equivalent_transform,
    oblique_projector,
    one_step_predict,
    simulate,
    to_reduced_rank_var,
    weights_from_loadings,
)

__version__ = "0.1.0"

__all__ = [
    "EvalReport",
    "FitConfig",
    "FitResult",
    "LorenzConfig",
    "PredVAR",
    "PredVarParams",
    "ReducedRankVar",
    "Scaling",
    "StackedData",
    "SweepCell",
    "SyntheticDataset",
    "WeightMatrices",
    "build_stacks",
    "consistency_sweep",
    "constrained_weights",
    "dlv_objective",
    "dual_weights",
    "em_signal_prediction_cov",
    "equivalent_transform",
    "evaluate_fit",
    "exceptions",
    "extract_dlvs",
    "fit_oblique",
    "fit_oneshot",
    "fit_orth",
    "fit_predvar",
    "init_weights",
    "integrate_lorenz",
    "lag_coeffs",
    "model_case_study",
    "oblique_projector",
    "one_step_predict",
    "orth_case_study",
    "paper_case_study",
    "proj_objective",
    "projector_distance",
    "residual_covariances",
    "sensor_traces",
    "signal_subspace_angle",
    "simulate",
    "to_reduced_rank_var",
    "truth_result",
    "update_dynamics",
    "update_loadings",
    "weights_from_loadings",
]
