"""Simulation and smoothness estimation for Brownian semi-stationary processes.

The library is organized around the gamma weight function g(x) = x^a e^(-lx):
`kernel` evaluates it and its second-order quantities, `gaussian` the limit
constants, `simulate` the exact and approximate samplers, `variation` the
power variations, `estimate` the change-of-frequency estimators with
confidence intervals, `spectral` the Welch estimation and model fit, and
`montecarlo`/`cli` the reproducible experiment harness.
"""

from .errors import (
    BssError,
    ConfigurationError,
    DataError,
    DegenerateInputError,
    DomainError,
    NumericError,
    RegimeError,
)
from .kernel import (
    KernelSpec,
    SecondOrderTable,
    assumption_report,
    find_burn_in,
    gamma_kernel_eval,
    kernel_autocovariance,
    tau_k,
    variogram,
)
from .gaussian import (
    HermiteExpansion,
    LambdaMatrix,
    abs_moment,
    hermite_coeffs,
    lambda_matrix,
    rho_cross,
    rho_k,
)
from .simulate import (
    GaussianCoreSampler,
    SeriesGrid,
    SigmaModel,
    simulate_bss,
    simulate_fbm,
    simulate_gaussian_core,
    simulate_sigma,
)
from .variation import (
    FilterSpec,
    PowerVariationResult,
    PowerVariationStream,
    diff_filter,
    gapped_pv,
    normalized_pv,
    power_variation,
)
from .estimate import (
    EstimateReport,
    alpha_hat,
    alpha_scan,
    choose_gap,
    cof,
    cof_ci,
    gapped_alpha_ci,
    h_p,
    normal_quantile,
)
from .spectral import PsdEstimate, SpectrumFit, fit_spectrum, welch_psd
from .series_io import export_series, ingest_series
from .montecarlo import run_montecarlo
from .config import RunConfig
from .reports import Report, emit_csv, emit_report

__version__ = "0.1.0"
