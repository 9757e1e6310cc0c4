"""Convolution-smoothed functional linear quantile regression.

Fits scalar-on-function quantile regression by minimizing a Gaussian-smoothed
check loss with a roughness penalty in a second-order Sobolev space, using
safeguarded Barzilai-Borwein gradient descent on the representer coordinates.
Ships pointwise confidence intervals, simultaneous confidence bands,
conditional-quantile intervals, quantile monotonization, and a Monte Carlo
harness with a principal-component baseline.
"""

from .exceptions import (
    ConfigMismatch,
    DegenerateBandwidth,
    DimensionMismatch,
    DivergenceError,
    DomainError,
    FlqrError,
    GridInvalid,
    GridMismatch,
    InsufficientPaths,
    InvalidInput,
    InvalidTauGrid,
    ParseError,
    SafeguardTrigger,
    SpectrumFailure,
    TuningFailure,
)
from .grids import (
    FunctionalSample,
    Grid,
    GridFunction,
    inner_l2,
    integrate,
    load_sample,
    save_sample,
)
from .sobolev import RepresenterGram, SobolevKernel, build_gram, kernel_r1, xi_functions
from .smoothing import SmoothKernel, check_loss, kbar, smoothed_loss, smoothed_loss_gradient
from .optimizer import FitTrace, GdConfig, Theta, bb_step, gradient, minimize, objective
from .tuning import TuningConfig, cross_validate_lambda, default_lambda_grid, rot_bandwidth
from .estimator import (
    FitContext,
    FitResult,
    QuantileCurveFamily,
    estimate_sparsity,
    fit,
    fit_family,
    predict,
)
from .monotonize import QuantilePath, combine, pava, rearrange
from .spectrum import EigenSystem, penalty_matrix, solve_eigensystem, w_lambda_apply, weighted_covariance
from .inference import (
    PointwiseCi,
    QuantileCi,
    Scb,
    normal_quantile,
    pointwise_ci,
    quantile_ci,
    scb,
)
from .fpca import FpcaFit, fpca_baseline_fit, fpca_predict
from .simulate import (
    McReport,
    SimDesign,
    generate,
    mise,
    new_observation,
    run_coverage_experiment,
    run_mise_experiment,
    true_beta,
    true_quantile,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigMismatch", "DegenerateBandwidth", "DimensionMismatch", "DivergenceError",
    "DomainError", "FlqrError", "GridInvalid", "GridMismatch", "InsufficientPaths",
    "InvalidInput", "InvalidTauGrid", "ParseError", "SafeguardTrigger",
    "SpectrumFailure", "TuningFailure",
    "FunctionalSample", "Grid", "GridFunction", "inner_l2", "integrate",
    "load_sample", "save_sample",
    "RepresenterGram", "SobolevKernel", "build_gram", "kernel_r1", "xi_functions",
    "SmoothKernel", "check_loss", "kbar", "smoothed_loss", "smoothed_loss_gradient",
    "FitTrace", "GdConfig", "Theta", "bb_step", "gradient", "minimize", "objective",
    "TuningConfig", "cross_validate_lambda", "default_lambda_grid", "rot_bandwidth",
    "FitContext", "FitResult", "QuantileCurveFamily", "estimate_sparsity", "fit",
    "fit_family", "predict",
    "QuantilePath", "combine", "pava", "rearrange",
    "EigenSystem", "penalty_matrix", "solve_eigensystem", "w_lambda_apply",
    "weighted_covariance",
    "PointwiseCi", "QuantileCi", "Scb", "normal_quantile", "pointwise_ci",
    "quantile_ci", "scb",
    "FpcaFit", "fpca_baseline_fit", "fpca_predict",
    "McReport", "SimDesign", "generate", "mise", "new_observation",
    "run_coverage_experiment", "run_mise_experiment", "true_beta", "true_quantile",
    "__version__",
]
