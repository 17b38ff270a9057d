"""Segmentation of univariate time series.

Two model families are available: a regression model with a hidden logistic
process fitted by EM (``fit_rhlp``), and piecewise polynomial regression fitted
exactly by dynamic programming (``fisher_dp``) or by the faster alternating
variant (``multi_start_iterative``).
"""

from ._segreg import (
    FitReport,
    GaussianComponent,
    LogisticProcess,
    PiecewiseFit,
    RhlpParams,
    SegregError,
    bic,
    denoise,
    denoising_error,
    design_matrix,
    e_step,
    fisher_dp,
    fit_rhlp,
    free_parameter_count,
    gaussian_log_density,
    hard_labels,
    iterative_fisher,
    logistic_proportions,
    misclassification_rate,
    mixture_log_likelihood,
    multi_start_iterative,
    polynomial_basis,
    run_benchmark,
    scenario_expectation,
    select_model,
    simulate_piecewise,
    simulate_rhlp,
    transition_times,
    weighted_least_squares,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
