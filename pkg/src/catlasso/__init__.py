"""Group lasso and sparse group lasso for categorical predictors.

Standardization is done by centering and scaling the indicator columns
with the square roots of the level frequencies, followed by a
back-transform of the coefficients to sum-to-zero form.
"""

from .design import (
    CategoricalVariable,
    CrossTab,
    GroupedDesign,
    code_matrix,
    crosstab,
    indicator_matrix,
    interaction_indicators,
    reference_from_sum_zero,
)
from .solver import (
    FitResult,
    NonConvergenceError,
    PenaltySpec,
    SolverConfig,
    fit,
    fit_group_lasso,
    fit_sparse_group_lasso,
    group_soft_threshold,
    kkt_residual,
    lambda_max,
    sparse_group_prox,
)
from .standardize import (
    build_design,
    interaction_standardizer,
    penalty_norm,
    scaled_block,
    theta_from_beta,
    theta_interaction,
)

__all__ = [
    "CategoricalVariable",
    "CrossTab",
    "GroupedDesign",
    "code_matrix",
    "crosstab",
    "indicator_matrix",
    "interaction_indicators",
    "reference_from_sum_zero",
    "FitResult",
    "NonConvergenceError",
    "PenaltySpec",
    "SolverConfig",
    "fit",
    "fit_group_lasso",
    "fit_sparse_group_lasso",
    "group_soft_threshold",
    "kkt_residual",
    "lambda_max",
    "sparse_group_prox",
    "build_design",
    "interaction_standardizer",
    "penalty_norm",
    "scaled_block",
    "theta_from_beta",
    "theta_interaction",
]

__version__ = "0.1.0"
