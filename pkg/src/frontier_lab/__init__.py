"""Nonparametric boundary regression with one-sided errors.

LP envelope estimators, higher-order kernel smoothing with bias correction,
residual empirical distribution functions, goodness-of-fit tests for the
error law, and a seeded Monte-Carlo harness.
"""

from ._version import __version__
from .estimators import (
    BoundaryFit,
    BoundaryRegressor,
    MidrangeRegressor,
    SmoothBoundaryRegressor,
    SmoothFit,
    bias_corrected_smooth,
    default_smoothing_bandwidth,
    estimate_bias_g0,
    fit_boundary,
    fit_local_linear_hvk,
    fit_midrange_mean,
    optimal_bandwidth,
    smooth_boundary,
)
from .exceptions import (
    ConfigError,
    DegreeTooHigh,
    DomainError,
    EstimationError,
    FrontierLabError,
    NumericalDegeneracy,
    UnsupportedModeError,
)
from .gof import (
    applicability_report,
    critical_value,
    cvm_statistic,
    edf,
    estimate_theta_exp,
    estimate_theta_uniform,
    expansion_remainder,
    gof_test,
    kolmogorov_cdf,
    ks_statistic,
    residuals,
    sup_edf_diff,
)
from .harness import (
    ExperimentConfig,
    MonteCarloResult,
    parse_config,
    run_bias_profile,
    run_edf_equivalence_study,
    run_power_study,
    run_rate_study,
    write_results,
)
from .kernels import HigherOrderKernel, build_kernel, kernel_moment
from .model import (
    MirroredExp,
    PolyBump,
    PowerTail,
    RegressionTruth,
    Sample,
    UniformSym,
    generate_sample,
    sample_errors,
)
from .polyopt import (
    ObjectiveWeights,
    PolyFit,
    WindowData,
    brute_force_solve,
    integral_objective,
    solve_upper_polynomial,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
