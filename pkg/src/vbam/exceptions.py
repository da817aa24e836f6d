"""Exception types shared across the package."""


class VbamError(Exception):
    """Base class for all package-specific errors."""


class DegenerateCovariateError(VbamError, ValueError):
    """A covariate cannot support the requested basis (e.g. constant input)."""


class DegenerateTestError(VbamError, ValueError):
    """The global test moments collapsed (null design block or zero trace)."""


class NumericalError(VbamError, RuntimeError):
    """A linear-algebra step failed beyond recovery (singular precision)."""


class UnconvergedFitError(VbamError, RuntimeError):
    """An operation requires a converged fit but received one that is not."""
