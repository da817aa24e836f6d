"""Coordinate-ascent engines for the variational additive model.

Two mean-field engines share one sweep structure: build the prior
precision block diagonal, refresh the Gaussian factor over all mean
coefficients, refresh the inverse-gamma scale factors, then score the
evidence lower bound.  The Gaussian engine also tracks the error
variance factor; the probit engine instead carries truncated-normal
latent responses whose means feed the coefficient update.

All updates are exact coordinate maximizers, so the Gaussian bound is
nondecreasing up to rounding; convergence is declared when the absolute
bound change drops below ``FitControl.tol``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .design import DesignBundle
from .exceptions import NumericalError
from .numerics import inverse_mills, log_gamma, std_normal_logcdf

__all__ = [
    "FitControl",
    "VariationalFit",
    "fit_gaussian",
    "fit_probit",
    "elbo_gaussian",
    "elbo_probit",
    "extract_curve",
]


@dataclass(frozen=True)
class FitControl:
    """Convergence controls: absolute ELBO tolerance, iteration cap, and
    the initial value of every inverse-gamma scale factor."""

    tol: float = 1e-6
    max_iter: int = 500
    b_init: float = 1.0

    def __post_init__(self) -> None:
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.b_init > 0.0:
            raise ValueError("b_init must be positive")


@dataclass
class VariationalFit:
    """Converged (or capped) variational parameters.

    ``mu_theta``/``sigma_theta`` parameterize the Gaussian factor over
    all mean coefficients.  ``b_sigma2`` is the error-variance scale
    factor (Gaussian family only); ``b_omega``/``b_eta`` hold one scale
    factor per smoothed/functional term.  ``mu_ystar`` is the
    truncated-normal latent mean vector (probit family only).
    """

    family: str
    mu_theta: np.ndarray
    sigma_theta: np.ndarray
    b_sigma2: float | None
    b_omega: dict[str, float]
    b_eta: dict[str, float]
    mu_ystar: np.ndarray | None
    elbo_trace: np.ndarray
    iterations: int
    converged: bool
    n_obs: int
    diagnostic: str | None = None

    # shape parameter a_e + n/2 of the error-variance factor; set by the engines
    _ae_n2: float = field(default=0.0, repr=False)

    @property
    def noise_precision(self) -> float:
        """Posterior mean error precision; 1 on the probit latent scale."""
        if self.family == "probit":
            return 1.0
        return self._ae_n2 / self.b_sigma2

    @property
    def noise_variance(self) -> float:
        """Posterior noise variance estimate (reciprocal of the precision)."""
        return 1.0 / self.noise_precision


class _Layout:
    """Precomputed prior structure shared by both engines."""

    def __init__(self, bundle: DesignBundle):
        spec = bundle.spec
        hyper = spec.hyper
        self.n_unpen = bundle.n_unpenalized
        prior_var = np.r_[hyper.sigma_a2, np.full(len(spec.scalar_terms), hyper.sigma_b2)]
        self.unpen_prec = 1.0 / prior_var
        self.unpen_var = prior_var
        self.terms = []
        for i, term in enumerate(spec.smooth_terms):
            a, b = hyper.smooth_ab(i)
            self.terms.append(
                (term.name, bundle.blocks[term.name], bundle.penalties[term.name].matrix, a, b, "omega")
            )
        for i, term in enumerate(spec.functional_terms):
            a, b = hyper.functional_ab(i)
            self.terms.append(
                (term.name, bundle.blocks[term.name], bundle.penalties[term.name].matrix, a, b, "eta")
            )

    def prior_precision(self, b_values: dict[str, float]) -> np.ndarray:
        dim = self.n_unpen + sum(sl.stop - sl.start for _, sl, *_ in self.terms)
        d = np.zeros((dim, dim))
        d[: self.n_unpen, : self.n_unpen] = np.diag(self.unpen_prec)
        for name, sl, pen, a, _, _ in self.terms:
            k = sl.stop - sl.start
            d[sl, sl] = (a + 0.5 * k) / b_values[name] * pen
        return d

    def normalizer_sum(self, b_values: dict[str, float]) -> float:
        """Inverse-gamma log-normalizer combination summed over terms."""
        total = 0.0
        for name, sl, _, a, b, _ in self.terms:
            k = sl.stop - sl.start
            shape = a + 0.5 * k
            total += a * np.log(b) - shape * np.log(b_values[name])
            total += log_gamma(shape) - log_gamma(a)
        return total


def _check_design(bundle: DesignBundle) -> None:
    for term in list(bundle.spec.smooth_terms) + list(bundle.spec.functional_terms):
        block = bundle.matrix[:, bundle.blocks[term.name]]
        if not np.any(block):
            raise NumericalError(
                f"design block for term {term.name!r} is identically zero; the precision is singular"
            )


def _solve_precision(prec: np.ndarray):
    """Cholesky factor of the precision, with one jitter retry."""
    try:
        return cho_factor(prec, lower=True)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-10 * np.mean(np.diag(prec))
    try:
        return cho_factor(prec + jitter * np.eye(prec.shape[0]), lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("precision matrix is not positive definite") from exc


def _posterior(prec: np.ndarray):
    cf = _solve_precision(prec)
    sigma = cho_solve(cf, np.eye(prec.shape[0]))
    sigma = 0.5 * (sigma + sigma.T)
    logdet_sigma = -2.0 * float(np.sum(np.log(np.diag(cf[0]))))
    return sigma, logdet_sigma


def _update_penalty_scales(layout: _Layout, mu, sigma, b_values) -> tuple[dict, dict]:
    b_omega, b_eta = {}, {}
    for name, sl, pen, a, b, kind in layout.terms:
        mu_b = mu[sl]
        quad = float(mu_b @ pen @ mu_b) + float(np.sum(pen * sigma[sl, sl]))
        b_values[name] = b + 0.5 * quad
        (b_omega if kind == "omega" else b_eta)[name] = b_values[name]
    return b_omega, b_eta


def _unpen_prior_quad(layout: _Layout, mu, sigma) -> float:
    k = layout.n_unpen
    return float(np.sum(mu[:k] ** 2 * layout.unpen_prec) + np.sum(np.diag(sigma)[:k] * layout.unpen_prec))


def fit_gaussian(bundle: DesignBundle, y, control: FitControl = FitControl()) -> VariationalFit:
    """Fit the Gaussian additive model by coordinate ascent.

    Each sweep rebuilds the prior precision from the current scale
    factors, solves for the Gaussian coefficient factor, then refreshes
    the error-variance and per-term shrinkage factors.  Returns when the
    evidence lower bound changes by less than ``control.tol`` or the
    iteration cap is hit (``converged`` is False in the latter case).
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != bundle.n:
        raise ValueError(f"response has {y.shape[0]} rows but design has {bundle.n}")
    if not np.all(np.isfinite(y)):
        raise ValueError("response contains non-finite values")
    _check_design(bundle)
    n, p_total = bundle.n, bundle.p_total
    if n <= p_total:
        warnings.warn(
            f"n = {n} does not exceed the coefficient count {p_total}; the fit may be unstable",
            stacklevel=2,
        )
    hyper = bundle.spec.hyper
    layout = _Layout(bundle)
    c = bundle.matrix
    ctc = c.T @ c
    cty = c.T @ y
    yty = float(y @ y)
    ae_n2 = hyper.a_e + 0.5 * n

    b_sigma = control.b_init
    b_values = {name: control.b_init for name, *_ in layout.terms}
    trace: list[float] = []
    converged = False
    mu = np.zeros(p_total)
    sigma = np.eye(p_total)
    b_omega: dict[str, float] = {}
    b_eta: dict[str, float] = {}

    for iteration in range(1, control.max_iter + 1):
        tau = ae_n2 / b_sigma
        prec = tau * ctc + layout.prior_precision(b_values)
        sigma, logdet_sigma = _posterior(prec)
        mu = tau * (sigma @ cty)

        resid = yty - 2.0 * float(mu @ cty) + float(mu @ ctc @ mu)
        tr_fit = float(np.sum(ctc * sigma))
        b_sigma = hyper.b_e + 0.5 * (resid + tr_fit)
        b_omega, b_eta = _update_penalty_scales(layout, mu, sigma, b_values)

        elbo = _elbo_gaussian_core(layout, hyper, n, p_total, mu, sigma, logdet_sigma, b_sigma, b_values)
        trace.append(elbo)
        if iteration > 1 and abs(trace[-1] - trace[-2]) < control.tol:
            converged = True
            break

    fit = VariationalFit(
        family="gaussian",
        mu_theta=mu,
        sigma_theta=sigma,
        b_sigma2=b_sigma,
        b_omega=b_omega,
        b_eta=b_eta,
        mu_ystar=None,
        elbo_trace=np.asarray(trace),
        iterations=len(trace),
        converged=converged,
        n_obs=n,
    )
    fit._ae_n2 = ae_n2
    return fit


def _elbo_gaussian_core(layout, hyper, n, p_total, mu, sigma, logdet_sigma, b_sigma, b_values) -> float:
    ae_n2 = hyper.a_e + 0.5 * n
    elbo = 0.5 * p_total - 0.5 * n * np.log(2.0 * np.pi)
    elbo -= 0.5 * float(np.sum(np.log(layout.unpen_var)))
    elbo += 0.5 * logdet_sigma
    elbo -= 0.5 * _unpen_prior_quad(layout, mu, sigma)
    elbo += hyper.a_e * np.log(hyper.b_e) - ae_n2 * np.log(b_sigma)
    elbo += log_gamma(ae_n2) - log_gamma(hyper.a_e)
    elbo += layout.normalizer_sum(b_values)
    return float(elbo)


def elbo_gaussian(bundle: DesignBundle, y, fit: VariationalFit) -> float:
    """Evidence lower bound of a Gaussian fit state, recomputed from scratch."""
    if fit.family != "gaussian":
        raise ValueError("fit is not from the Gaussian engine")
    y = np.asarray(y, dtype=float).ravel()
    layout = _Layout(bundle)
    sign, logdet_sigma = np.linalg.slogdet(fit.sigma_theta)
    if sign <= 0:
        raise NumericalError("coefficient covariance is not positive definite")
    b_values = {**fit.b_omega, **fit.b_eta}
    return _elbo_gaussian_core(
        layout,
        bundle.spec.hyper,
        bundle.n,
        bundle.p_total,
        fit.mu_theta,
        fit.sigma_theta,
        logdet_sigma,
        fit.b_sigma2,
        b_values,
    )


def fit_probit(bundle: DesignBundle, y, control: FitControl = FitControl()) -> VariationalFit:
    """Fit the binary additive model through its latent-Gaussian form.

    The latent responses have unit variance, so the coefficient factor
    needs no error-precision scaling; their truncated-normal means are
    refreshed from the current linear predictor each sweep, pushing
    success rows above it and failure rows below it.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != bundle.n:
        raise ValueError(f"response has {y.shape[0]} rows but design has {bundle.n}")
    uniq = np.unique(y)
    if not np.all(np.isin(uniq, (0.0, 1.0))):
        raise ValueError("probit response must be coded 0/1")
    if uniq.size < 2:
        raise ValueError("probit response needs at least one success and one failure")
    _check_design(bundle)
    n, p_total = bundle.n, bundle.p_total
    if n <= p_total:
        warnings.warn(
            f"n = {n} does not exceed the coefficient count {p_total}; the fit may be unstable",
            stacklevel=2,
        )
    hyper = bundle.spec.hyper
    layout = _Layout(bundle)
    c = bundle.matrix
    ctc = c.T @ c
    is_one = y == 1.0

    b_values = {name: control.b_init for name, *_ in layout.terms}
    m_star = np.zeros(n)
    trace: list[float] = []
    converged = False
    mu = np.zeros(p_total)
    sigma = np.eye(p_total)
    b_omega: dict[str, float] = {}
    b_eta: dict[str, float] = {}
    eta = np.zeros(n)

    for iteration in range(1, control.max_iter + 1):
        prec = ctc + layout.prior_precision(b_values)
        sigma, logdet_sigma = _posterior(prec)
        mu = sigma @ (c.T @ m_star)
        eta = c @ mu
        m_star = np.where(
            is_one,
            eta + inverse_mills(eta, "upper"),
            eta - inverse_mills(eta, "lower"),
        )
        b_omega, b_eta = _update_penalty_scales(layout, mu, sigma, b_values)

        elbo = _elbo_probit_core(layout, hyper, y, eta, ctc, mu, sigma, logdet_sigma, b_values)
        trace.append(elbo)
        if iteration > 1 and abs(trace[-1] - trace[-2]) < control.tol:
            converged = True
            break

    diagnostic = None
    if not converged and np.max(np.abs(eta)) > 8.0:
        diagnostic = "linear predictor diverged; the classes may be completely separated"
    fit = VariationalFit(
        family="probit",
        mu_theta=mu,
        sigma_theta=sigma,
        b_sigma2=None,
        b_omega=b_omega,
        b_eta=b_eta,
        mu_ystar=m_star,
        elbo_trace=np.asarray(trace),
        iterations=len(trace),
        converged=converged,
        n_obs=n,
        diagnostic=diagnostic,
    )
    fit._ae_n2 = hyper.a_e + 0.5 * n
    return fit


def _elbo_probit_core(layout, hyper, y, eta, ctc, mu, sigma, logdet_sigma, b_values) -> float:
    loglik = float(y @ std_normal_logcdf(eta) + (1.0 - y) @ std_normal_logcdf(-eta))
    elbo = loglik + 0.5 * logdet_sigma - 0.5 * float(np.sum(ctc * sigma))
    elbo -= 0.5 * _unpen_prior_quad(layout, mu, sigma)
    elbo += layout.normalizer_sum(b_values)
    return float(elbo)


def elbo_probit(bundle: DesignBundle, y, fit: VariationalFit) -> float:
    """Evidence lower bound of a probit fit state, recomputed from scratch."""
    if fit.family != "probit":
        raise ValueError("fit is not from the probit engine")
    y = np.asarray(y, dtype=float).ravel()
    layout = _Layout(bundle)
    sign, logdet_sigma = np.linalg.slogdet(fit.sigma_theta)
    if sign <= 0:
        raise NumericalError("coefficient covariance is not positive definite")
    ctc = bundle.matrix.T @ bundle.matrix
    eta = bundle.matrix @ fit.mu_theta
    b_values = {**fit.b_omega, **fit.b_eta}
    return _elbo_probit_core(
        layout, bundle.spec.hyper, y, eta, ctc, fit.mu_theta, fit.sigma_theta, logdet_sigma, b_values
    )


def extract_curve(fit: VariationalFit, bundle: DesignBundle, term: str, grid):
    """Posterior mean curve and pointwise sd for a penalized term.

    Returns ``(estimate, sd)`` evaluated at ``grid``; the estimate uses
    the same (possibly centered) basis rows that built the design, so it
    reproduces the term's fitted contribution exactly.
    """
    if term not in bundle.bases:
        raise KeyError(f"unknown smoothed/functional term {term!r}")
    sl = bundle.blocks[term]
    rows = bundle.basis_rows(term, grid)
    mu_b = fit.mu_theta[sl]
    sigma_b = fit.sigma_theta[sl, sl]
    estimate = rows @ mu_b
    var = np.einsum("ij,jk,ik->i", rows, sigma_b, rows)
    return estimate, np.sqrt(np.maximum(var, 0.0))
