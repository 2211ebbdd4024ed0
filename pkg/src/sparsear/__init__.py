"""Sparse autoregressive model estimation.

Estimators (least squares, Yule-Walker, Burg, lasso, penalized Yule-Walker,
orthogonal matching pursuit), goodness-of-fit statistics, preprocessing and
a reproducible simulation harness.
"""

__version__ = "0.1.0"

from .exceptions import DataError, NumericalError, SparseARError
from .model import (
    ArModel,
    InnovationSpec,
    TimeSeries,
    compressibility,
    is_stable,
    psd,
    simulate,
    spectral_spread,
    sufficient_stable,
    theoretical_autocovariance,
)
from .design import build_design, empirical_covariance, re_check_exhaustive, true_covariance_interval
from .solvers import SolverOptions, kkt_check, lasso_quadratic, penalized_norm_solve
from .estimators import (
    METHODS,
    BurgAR,
    EstimatorConfig,
    FitResult,
    LassoAR,
    LeastSquaresAR,
    OMPAR,
    PenalizedYuleWalkerAR,
    YuleWalkerAR,
    fit_method,
    make_estimator,
)
from .gof import gof_report

__all__ = [
    "ArModel", "InnovationSpec", "TimeSeries", "simulate", "is_stable", "sufficient_stable",
    "psd", "spectral_spread", "theoretical_autocovariance", "compressibility",
    "build_design", "empirical_covariance", "re_check_exhaustive", "true_covariance_interval",
    "SolverOptions", "lasso_quadratic", "penalized_norm_solve", "kkt_check",
    "METHODS", "EstimatorConfig", "FitResult", "fit_method", "make_estimator",
    "LeastSquaresAR", "YuleWalkerAR", "BurgAR", "LassoAR", "OMPAR", "PenalizedYuleWalkerAR",
    "gof_report", "SparseARError", "DataError", "NumericalError",
]
