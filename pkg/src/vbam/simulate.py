"""Data generators and the Monte-Carlo study runner.

Scenarios pair one true effect shape with an outcome family, sample
size, effect scale and basis size; the runner replicates the draw -> fit
-> test pipeline and aggregates rejection rates.  Replication ``r`` of a
scenario seeds its own generator from ``(seed, r)``, so results are
bitwise reproducible and independent of execution order.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cavi import FitControl, fit_gaussian, fit_probit
from .design import FunctionalTerm, ModelSpec, SmoothTerm, assemble, center_smooth_blocks
from .exceptions import VbamError
from .inference import global_effect_test
from .numerics import std_normal_cdf

__all__ = [
    "SimScenario",
    "SimReport",
    "sigmoid_curve",
    "gamma_peak_curve",
    "two_peak_curve",
    "seasonal_curve",
    "ar1_gaussian_process",
    "default_basis_size",
    "run_scenario",
]

SMOOTH_EFFECTS = ("smooth_sigmoid", "smooth_peak")
FUNCTIONAL_EFFECTS = ("func_two_peak", "func_seasonal")
WORKERS_ENV = "VBAM_WORKERS"


def sigmoid_curve(z) -> np.ndarray:
    """Decreasing sigmoid: the negated standard normal cdf of (z - 0.5) / 0.5."""
    z = np.asarray(z, dtype=float)
    return -std_normal_cdf((z - 0.5) / 0.5)


def gamma_peak_curve(z) -> np.ndarray:
    """Skewed bump 4 z exp(-2 z), peaking at z = 1/2."""
    z = np.asarray(z, dtype=float)
    return 4.0 * z * np.exp(-2.0 * z)


def two_peak_curve(t) -> np.ndarray:
    """Two Gaussian bumps at t = 1/4 (tall) and t = 3/4 (half height)."""
    t = np.asarray(t, dtype=float)
    amp = np.sqrt(100.0 / (2.0 * np.pi))
    return 0.25 * amp * np.exp(-50.0 * (t - 0.25) ** 2) + 0.125 * amp * np.exp(
        -50.0 * (t - 0.75) ** 2
    )


def seasonal_curve(t) -> np.ndarray:
    """Sine wave with linearly growing amplitude: sin(pi (4t - 1)) (t + 0.1222)."""
    t = np.asarray(t, dtype=float)
    return np.sin(np.pi * (4.0 * t - 1.0)) * (t + 1222.0 / 10000.0)


_CURVES = {
    "smooth_sigmoid": sigmoid_curve,
    "smooth_peak": gamma_peak_curve,
    "func_two_peak": two_peak_curve,
    "func_seasonal": seasonal_curve,
}


def ar1_gaussian_process(n: int, grid, center, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` curves: ``center`` plus stationary unit-variance AR(1) noise.

    Grid points j and k correlate as ``rho ** |j - k|``.
    """
    if not abs(rho) < 1.0:
        raise ValueError(f"AR(1) correlation must satisfy |rho| < 1, got {rho}")
    grid = np.asarray(grid, dtype=float).ravel()
    center = np.broadcast_to(np.asarray(center, dtype=float), grid.shape)
    t_len = grid.size
    shocks = rng.standard_normal((n, t_len))
    dev = np.empty((n, t_len))
    dev[:, 0] = shocks[:, 0]
    scale = np.sqrt(1.0 - rho * rho)
    for j in range(1, t_len):
        dev[:, j] = rho * dev[:, j - 1] + scale * shocks[:, j]
    return center + dev


def default_basis_size(family: str, effect_kind: str, n: int, t_len: int | None = None) -> int:
    """Basis sizes that keep the global test near nominal size.

    Larger samples tolerate richer bases; binary outcomes need leaner
    ones, and at n = 50 the binary regimes shrink further (functional
    terms also keyed on the grid length).
    """
    if effect_kind == "smooth":
        if family == "gaussian":
            return 8
        return 6 if n >= 100 else 4
    if effect_kind == "functional":
        if family == "gaussian":
            return 12
        if n >= 100:
            return 9
        if t_len is not None and t_len >= 100:
            return 7
        return 6
    raise ValueError(f"effect_kind must be 'smooth' or 'functional', got {effect_kind!r}")


@dataclass(frozen=True)
class SimScenario:
    """One cell of the empirical-study matrix.

    ``xi_scale`` multiplies the true effect; 0 is the null regime.
    ``t_len`` is the functional grid length (ignored for smooth
    effects).  ``knots`` is the basis size of the fitted term.
    """

    family: str
    effect: str
    n: int
    xi_scale: float
    knots: int
    replications: int
    seed: int
    t_len: int | None = None
    alpha_level: float = 0.05

    def __post_init__(self) -> None:
        if self.family not in ("gaussian", "probit"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.effect not in _CURVES:
            raise ValueError(f"unknown effect {self.effect!r}; choose from {sorted(_CURVES)}")
        if self.effect in FUNCTIONAL_EFFECTS and self.t_len is None:
            raise ValueError("functional scenarios need t_len")
        if self.n < 10:
            raise ValueError("scenario sample size is too small")
        if self.xi_scale < 0:
            raise ValueError("xi_scale must be non-negative")
        if self.replications < 1:
            raise ValueError("replications must be positive")
        if not 0.0 < self.alpha_level < 1.0:
            raise ValueError("alpha_level must lie in (0, 1)")

    @property
    def effect_kind(self) -> str:
        return "smooth" if self.effect in SMOOTH_EFFECTS else "functional"


@dataclass(frozen=True)
class SimReport:
    """Aggregated scenario outcome.

    The rejection rate is computed over converged replications only;
    failed replications are counted, never silently dropped, and a
    failure fraction above 5% flags the scenario as unstable.
    """

    scenario: SimScenario
    rejection_rate: float
    mc_stderr: float
    failures: int
    replications_used: int
    flagged_unstable: bool
    per_rep_pvalues: np.ndarray | None = None


def _replicate(scenario: SimScenario, rep: int, control: FitControl) -> float | None:
    """One draw -> fit -> test replication; None signals a failure."""
    rng = np.random.default_rng([scenario.seed, rep])
    n = scenario.n
    curve = _CURVES[scenario.effect]

    if scenario.effect_kind == "smooth":
        if scenario.effect == "smooth_sigmoid":
            z = rng.standard_normal(n)
        else:
            z = rng.chisquare(1.0, n)
        signal = scenario.xi_scale * curve(z)
        model = ModelSpec(
            family=scenario.family,
            smooth_terms=(SmoothTerm("s", scenario.knots),),
        )
        data = dict(smooth_data={"s": z})
    else:
        grid = np.linspace(0.0, 1.0, scenario.t_len)
        gamma = curve(grid)
        w = ar1_gaussian_process(n, grid, gamma, 0.5, rng)
        # discrete functional effect: plain covariate-coefficient product
        signal = scenario.xi_scale * (w @ gamma)
        model = ModelSpec(
            family=scenario.family,
            functional_terms=(FunctionalTerm("w", scenario.knots, grid),),
        )
        data = dict(functional_data={"w": w})

    noise = rng.standard_normal(n)
    latent = signal + noise
    if scenario.family == "gaussian":
        y = latent
    else:
        y = (latent >= 0.0).astype(float)
        if y.min() == y.max():
            return None

    term = "s" if scenario.effect_kind == "smooth" else "w"
    try:
        bundle = center_smooth_blocks(assemble(model, **data))
        if scenario.family == "gaussian":
            fit = fit_gaussian(bundle, y, control)
        else:
            fit = fit_probit(bundle, y, control)
        if not fit.converged:
            return None
        result = global_effect_test(fit, bundle, term, response=y)
    except VbamError:
        return None
    return result.p_value


def _worker(args) -> float | None:
    return _replicate(*args)


def run_scenario(
    scenario: SimScenario,
    control: FitControl = FitControl(),
    workers: int | None = None,
    keep_pvalues: bool = False,
) -> SimReport:
    """Run every replication of one scenario and aggregate rejections.

    ``workers`` > 1 distributes replications over processes; the default
    honors the ``VBAM_WORKERS`` environment variable and otherwise runs
    sequentially.  Results are identical either way.
    """
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    reps = range(scenario.replications)
    if workers > 1:
        args = [(scenario, r, control) for r in reps]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pvalues = list(pool.map(_worker, args, chunksize=32))
    else:
        pvalues = [_replicate(scenario, r, control) for r in reps]

    kept = np.array([p for p in pvalues if p is not None])
    failures = scenario.replications - kept.size
    if kept.size == 0:
        raise VbamError(
            f"every replication of scenario {scenario} failed; nothing to aggregate"
        )
    rate = float(np.mean(kept < scenario.alpha_level))
    stderr = float(np.sqrt(rate * (1.0 - rate) / kept.size))
    return SimReport(
        scenario=scenario,
        rejection_rate=rate,
        mc_stderr=stderr,
        failures=failures,
        replications_used=int(kept.size),
        flagged_unstable=failures > 0.05 * scenario.replications,
        per_rep_pvalues=kept if keep_pvalues else None,
    )
