"""Global hypothesis test for one smoothed or functional effect.

A converged fit makes every curve estimate a fixed linear map of the
response: there is a weight vector ``c(g)`` with ``curve(g) = c(g)'r``
where ``r`` is the observed response (Gaussian family) or the latent
response mean (probit family).  Integrating the outer product
``c(g) c(g)'`` over the covariate range gives a matrix ``U`` whose
quadratic form ``r'Ur`` is the integrated squared curve estimate.  Under
the null of no effect its first two moments are matched to a scaled
chi-square, which supplies the p-value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import trapezoid_weights
from .cavi import VariationalFit
from .design import DesignBundle
from .exceptions import DegenerateTestError, UnconvergedFitError
from .numerics import ChiSqParams, chisq_sf

__all__ = [
    "ZlsResult",
    "smooth_reconstruction_vector",
    "functional_reconstruction_vector",
    "global_test_matrix",
    "satterthwaite",
    "global_effect_test",
]


@dataclass(frozen=True)
class ZlsResult:
    """Outcome of the global test for a single term.

    ``null_mean``/``null_variance`` are the matched moments of the
    statistic under the null; ``scale`` and ``df`` are the resulting
    scaled chi-square parameters (``scale * df == null_mean`` and
    ``2 * scale**2 * df == null_variance`` by construction).
    """

    term: str
    statistic: float
    scale: float
    df: float
    p_value: float
    null_mean: float
    null_variance: float
    grid_size: int


def _term_kind(bundle: DesignBundle, term: str) -> str:
    if any(t.name == term for t in bundle.spec.smooth_terms):
        return "smooth"
    if any(t.name == term for t in bundle.spec.functional_terms):
        return "functional"
    raise KeyError(f"term {term!r} is not a smoothed or functional term of this model")


def _require_converged(fit: VariationalFit) -> None:
    if not fit.converged:
        detail = f" ({fit.diagnostic})" if fit.diagnostic else ""
        raise UnconvergedFitError(
            f"the fit did not converge after {fit.iterations} iterations{detail}; "
            "refusing to test an unconverged model"
        )


def _reconstruction_matrix(fit: VariationalFit, bundle: DesignBundle, term: str, points) -> np.ndarray:
    """Rows are the response-weight vectors c(g) for each evaluation point."""
    sl = bundle.blocks[term]
    rows = bundle.basis_rows(term, points)
    block_rows = fit.sigma_theta[sl, :] @ bundle.matrix.T
    return fit.noise_precision * (rows @ block_rows)


def smooth_reconstruction_vector(fit: VariationalFit, bundle: DesignBundle, term: str, z: float) -> np.ndarray:
    """Weight vector reproducing the smoothed-curve estimate at ``z``.

    Satisfies ``c(z) @ r == extract_curve`` exactly, with ``r`` the
    response (Gaussian) or the latent response mean (probit).
    """
    _require_converged(fit)
    if _term_kind(bundle, term) != "smooth":
        raise ValueError(f"term {term!r} is not a smoothed term")
    return _reconstruction_matrix(fit, bundle, term, [float(z)])[0]


def functional_reconstruction_vector(fit: VariationalFit, bundle: DesignBundle, term: str, t: float) -> np.ndarray:
    """Weight vector reproducing the functional-coefficient estimate at ``t``."""
    _require_converged(fit)
    if _term_kind(bundle, term) != "functional":
        raise ValueError(f"term {term!r} is not a functional term")
    return _reconstruction_matrix(fit, bundle, term, [float(t)])[0]


def global_test_matrix(fit: VariationalFit, bundle: DesignBundle, term: str, eval_grid) -> np.ndarray:
    """Trapezoid accumulation of ``c(g) c(g)'`` over ``eval_grid``.

    The result is a symmetric positive semidefinite n-by-n matrix; its
    quadratic form with the response is the integrated squared curve
    estimate over the grid span.
    """
    _require_converged(fit)
    _term_kind(bundle, term)
    grid = np.asarray(eval_grid, dtype=float).ravel()
    if grid.size < 2:
        raise ValueError("eval_grid needs at least two points")
    if not np.all(np.diff(grid) > 0.0):
        raise ValueError("eval_grid must be strictly increasing")
    cmat = _reconstruction_matrix(fit, bundle, term, grid)
    w = trapezoid_weights(grid)
    u = cmat.T @ (w[:, None] * cmat)
    return 0.5 * (u + u.T)


def satterthwaite(e: float, psi: float) -> ChiSqParams:
    """Match mean ``e`` and variance ``psi`` to a scaled chi-square law."""
    if not (e > 0.0 and psi > 0.0):
        raise DegenerateTestError(
            f"cannot moment-match a null distribution with mean {e} and variance {psi}; "
            "the tested design block is numerically null"
        )
    return ChiSqParams(scale=psi / (2.0 * e), df=2.0 * e * e / psi)


def default_eval_grid(bundle: DesignBundle, term: str, num_points: int = 201) -> np.ndarray:
    """Default integration grid: the observed covariate span for smooth
    terms, the term's own grid for functional terms."""
    if _term_kind(bundle, term) == "functional":
        for t in bundle.spec.functional_terms:
            if t.name == term:
                return t.grid
    lo, hi = bundle.bases[term].boundary
    return np.linspace(lo, hi, num_points)


def global_effect_test(
    fit: VariationalFit,
    bundle: DesignBundle,
    term: str,
    response=None,
    eval_grid=None,
    v_cov="auto",
) -> ZlsResult:
    """Test the null that one smoothed or functional effect is zero.

    Parameters
    ----------
    fit : VariationalFit
        A converged fit of the model in ``bundle``.
    bundle : DesignBundle
        The design the fit was computed from.
    term : str
        Name of the smoothed or functional term under test.
    response : array_like, optional
        Observed response vector; required for Gaussian fits.  Probit
        fits test against the latent response mean instead.
    eval_grid : array_like, optional
        Integration grid; defaults to 201 equally spaced points over the
        covariate span (smooth) or the functional term's grid.
    v_cov : "auto" or array_like
        Null covariance of the response.  ``"auto"`` uses the posterior
        noise variance times identity (Gaussian) or identity (probit,
        unit latent variance).

    Returns
    -------
    ZlsResult
    """
    _require_converged(fit)
    kind = _term_kind(bundle, term)
    if eval_grid is None:
        eval_grid = default_eval_grid(bundle, term)
    grid = np.asarray(eval_grid, dtype=float).ravel()

    if fit.family == "gaussian":
        if response is None:
            raise ValueError("Gaussian tests need the observed response vector")
        r = np.asarray(response, dtype=float).ravel()
    else:
        r = fit.mu_ystar
    if r.shape[0] != bundle.n:
        raise ValueError("response length does not match the design")

    u = global_test_matrix(fit, bundle, term, grid)
    if isinstance(v_cov, str):
        if v_cov != "auto":
            raise ValueError(f"v_cov must be 'auto' or a matrix, got {v_cov!r}")
        noise_var = fit.noise_variance
        e = noise_var * float(np.trace(u))
        psi = 2.0 * noise_var**2 * float(np.sum(u * u))
    else:
        v = np.asarray(v_cov, dtype=float)
        if v.shape != u.shape:
            raise ValueError("supplied covariance has the wrong shape")
        uv = u @ v
        e = float(np.trace(uv))
        psi = 2.0 * float(np.sum(uv * uv.T))
    params = satterthwaite(e, psi)
    statistic = float(r @ u @ r)
    p_value = chisq_sf(statistic / params.scale, params.df)
    return ZlsResult(
        term=term,
        statistic=statistic,
        scale=params.scale,
        df=params.df,
        p_value=float(p_value),
        null_mean=e,
        null_variance=psi,
        grid_size=grid.size,
    )
