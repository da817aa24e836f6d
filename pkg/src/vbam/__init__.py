"""Variational Bayes additive models with global effect tests.

Fits Gaussian and binary (latent probit) additive regression models with
arbitrary numbers of penalized smoothed and scalar-on-function effects
by coordinate-ascent variational inference, and tests each penalized
effect globally through a Satterthwaite-calibrated quadratic form.
"""

from .basis import (
    BSplineBasis,
    PenaltyMatrix,
    difference_penalty,
    derivative_penalty,
    evaluate_basis,
    functional_penalty,
    make_basis,
    trapezoid_weights,
)
from .cavi import (
    FitControl,
    VariationalFit,
    elbo_gaussian,
    elbo_probit,
    extract_curve,
    fit_gaussian,
    fit_probit,
)
from .design import (
    DesignBundle,
    FunctionalTerm,
    HyperParams,
    ModelSpec,
    SmoothTerm,
    assemble,
    center_smooth_blocks,
)
from .exceptions import (
    DegenerateCovariateError,
    DegenerateTestError,
    NumericalError,
    UnconvergedFitError,
    VbamError,
)
from .inference import (
    ZlsResult,
    default_eval_grid,
    functional_reconstruction_vector,
    global_effect_test,
    global_test_matrix,
    satterthwaite,
    smooth_reconstruction_vector,
)
from .numerics import (
    ChiSqParams,
    chisq_sf,
    inverse_mills,
    log_gamma,
    std_normal_cdf,
    std_normal_logcdf,
    std_normal_pdf,
)
from .simulate import (
    SimReport,
    SimScenario,
    ar1_gaussian_process,
    default_basis_size,
    gamma_peak_curve,
    run_scenario,
    seasonal_curve,
    sigmoid_curve,
    two_peak_curve,
)

__version__ = "0.1.0"

__all__ = [
    "BSplineBasis",
    "PenaltyMatrix",
    "make_basis",
    "evaluate_basis",
    "difference_penalty",
    "derivative_penalty",
    "functional_penalty",
    "trapezoid_weights",
    "HyperParams",
    "SmoothTerm",
    "FunctionalTerm",
    "ModelSpec",
    "DesignBundle",
    "assemble",
    "center_smooth_blocks",
    "FitControl",
    "VariationalFit",
    "fit_gaussian",
    "fit_probit",
    "elbo_gaussian",
    "elbo_probit",
    "extract_curve",
    "ZlsResult",
    "smooth_reconstruction_vector",
    "functional_reconstruction_vector",
    "global_test_matrix",
    "satterthwaite",
    "global_effect_test",
    "default_eval_grid",
    "ChiSqParams",
    "log_gamma",
    "std_normal_pdf",
    "std_normal_cdf",
    "std_normal_logcdf",
    "inverse_mills",
    "chisq_sf",
    "SimScenario",
    "SimReport",
    "sigmoid_curve",
    "gamma_peak_curve",
    "two_peak_curve",
    "seasonal_curve",
    "ar1_gaussian_process",
    "default_basis_size",
    "run_scenario",
    "VbamError",
    "DegenerateCovariateError",
    "DegenerateTestError",
    "NumericalError",
    "UnconvergedFitError",
    "__version__",
]
