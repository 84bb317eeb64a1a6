"""Trace statistics of Wishart products and a high-dimensional CPC test.

The package exposes Gaussian quadratic-form moments, exact moments of the
normalized trace of four independent Wishart matrices with its martingale
decomposition, unbiased estimators of the commutator discrepancy between two
covariance matrices, the resulting one-sided normal test, and a seeded Monte
Carlo harness for checking all of the above.
"""
from .covmodel import (
    CovariancePair,
    RatioDiagnostics,
    SpdMatrix,
    assumption_ratios,
    commutator_theta,
    givens_rotation,
    make_cpc_pair,
    make_identity,
    make_toeplitz_ar1,
    sqrt_factor,
)
from .cpc_test import CPCTest, TestReport, normal_cdf, normal_quantile, run_cpc_test, split_four
from .estimators import (
    EstimateSet,
    SplitScatters,
    estimate_all,
    sigma_hat_cross,
    sigma_hat_quadratic,
    theta_hat,
    theta_hat_alternative,
)
from .exceptions import (
    DegenerateVarianceError,
    DimensionMismatchError,
    InsufficientDataError,
    InvalidDimensionError,
    InvalidParameterError,
    NotPositiveDefiniteError,
    PreconditionError,
    UnsupportedArityError,
    WishartCPCError,
)
from .gauss_moments import (
    central_moment,
    mc_quad_oracle,
    mixed_quad_expectation,
    quad_moment,
    sandwich_expectation,
)
from .harness import (
    McConfig,
    McReport,
    run_clt_cpc,
    run_clt_quartet,
    run_experiment,
    run_moment_validation,
    run_size_power,
)
from .sampling import (
    SampleMatrix,
    ScatterMatrix,
    centered_scatter,
    make_rng,
    prefix_scatter,
    sample_gaussian,
    scatter,
    wishart_quadratic_mean,
    wishart_trace_weighted_mean,
)
from .trace_moments import (
    MartingaleTrace,
    WishartQuartetSpec,
    asymptotic_variance_cpc,
    asymptotic_variance_quartet,
    conditional_variances,
    exact_variance_cpc,
    exact_variance_m,
    exact_variance_trace_product,
    expected_m,
    martingale_decompose,
    statistic_m,
)

__version__ = "0.1.0"
