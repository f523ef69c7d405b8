"""Sparse linear regression robust to outliers in the response.

Typical use::

    from robsparse import Dataset, PipelineConfig, full_pipeline, get_rule

    data = Dataset.from_raw(y, X_raw)
    result = full_pipeline(data, get_rule("hard"), PipelineConfig())
    result.fit.beta, result.fit.gamma
"""
from .core import (
    DataError,
    Dataset,
    DegenerateFitError,
    FitResult,
    GuardError,
    PipelineError,
    RobsparseError,
    TuningParams,
    Weights,
    load_csv,
    normalize_columns,
    objective,
)
from .lasso import SolverOptions, kkt_residual, lambda_grid, solve_weighted_lasso
from .preliminary import PreliminaryFit, fit_preliminary, select_preliminary, threshold_preliminary
from .robust import compute_weights, estimating_equation_residual, fit, gamma_step
from .selection import PipelineConfig, PipelineResult, bic_score, full_pipeline, select_fit
from .thresholding import ThresholdingRule, check_condition2, get_rule

__version__ = "0.1.0"
