"""Gated-ReLU networks as multiple kernel learning: masks, kernels, solvers and experiments."""

from .arrangements import (
    MaskSet,
    SimplexWeights,
    align_weights,
    enumerate_1d,
    estimate_ntk_weights,
    exact_weights_2d,
    mask_of_gate,
    sample_arrangements,
)
from .bounds import PlantedModel, bound_coverage, gaussian_norm_tail, make_planted_model, bound_lambda
from .cone import ConeDecomposition, ConeDecompositionError, decompose_all, decompose_group
from .kernels import (
    finite_width_ntk,
    krr_fit_predict,
    masking_kernel,
    mkl_objective,
    ntk_cross,
    ntk_matrix,
    ntk_value,
    weighted_kernel,
)
from .models import (
    GatedReluNetwork,
    ReluNetwork,
    gated_forward,
    network_from_convex,
    relu_forward,
    relu_from_decomposition,
)
from .solvers import (
    FitReport,
    group_lasso_fista,
    group_lasso_objective,
    irls,
    lambda_hat_from_solution,
    mkl_weights_from_solution,
    predict,
    squared_group_lasso_fista,
    squared_group_lasso_objective,
    weighted_ridge,
)

__version__ = "0.1.0"

__all__ = [
    "ConeDecomposition",
    "ConeDecompositionError",
    "FitReport",
    "GatedReluNetwork",
    "MaskSet",
    "PlantedModel",
    "ReluNetwork",
    "SimplexWeights",
    "align_weights",
    "bound_coverage",
    "bound_lambda",
    "decompose_all",
    "decompose_group",
    "enumerate_1d",
    "estimate_ntk_weights",
    "exact_weights_2d",
    "finite_width_ntk",
    "gated_forward",
    "gaussian_norm_tail",
    "group_lasso_fista",
    "group_lasso_objective",
    "irls",
    "krr_fit_predict",
    "lambda_hat_from_solution",
    "make_planted_model",
    "mask_of_gate",
    "masking_kernel",
    "mkl_objective",
    "mkl_weights_from_solution",
    "network_from_convex",
    "ntk_cross",
    "ntk_matrix",
    "ntk_value",
    "predict",
    "relu_forward",
    "relu_from_decomposition",
    "sample_arrangements",
    "squared_group_lasso_fista",
    "squared_group_lasso_objective",
    "weighted_kernel",
    "weighted_ridge",
]
