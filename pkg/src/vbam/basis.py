"""B-spline bases over scalar covariates and functional grids, with the
two penalty families used to shrink their coefficients.

Smoothed effects get a forward-difference penalty ``D'D`` acting on
adjacent basis coefficients.  Functional coefficient curves get a
derivative-based penalty: a convex mixture of the Gram matrices of the
basis functions themselves (level) and of their second derivatives
(curvature), both integrated over the observation grid.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .exceptions import DegenerateCovariateError

__all__ = [
    "BSplineBasis",
    "PenaltyMatrix",
    "make_basis",
    "evaluate_basis",
    "difference_penalty",
    "derivative_penalty",
    "functional_penalty",
    "trapezoid_weights",
]


@dataclass(frozen=True)
class BSplineBasis:
    """A clamped B-spline basis on ``[lo, hi]``.

    ``num_basis`` equals ``len(interior_knots) + degree + 1``; boundary
    knots are repeated ``degree + 1`` times so the basis is a partition
    of unity on the closed interval.
    """

    degree: int
    interior_knots: np.ndarray
    boundary: tuple[float, float]
    num_basis: int = field(init=False)

    def __post_init__(self) -> None:
        lo, hi = self.boundary
        knots = np.asarray(self.interior_knots, dtype=float)
        object.__setattr__(self, "interior_knots", knots)
        if knots.size and not np.all(np.diff(knots) > 0.0):
            raise DegenerateCovariateError("interior knots must be strictly increasing")
        if knots.size and not (lo < knots[0] and knots[-1] < hi):
            raise DegenerateCovariateError("interior knots must lie strictly inside the boundary")
        if not lo < hi:
            raise DegenerateCovariateError("boundary interval is empty")
        object.__setattr__(self, "num_basis", knots.size + self.degree + 1)

    @property
    def knot_vector(self) -> np.ndarray:
        """Full clamped knot vector with repeated boundary knots."""
        lo, hi = self.boundary
        return np.concatenate(
            [np.full(self.degree + 1, lo), self.interior_knots, np.full(self.degree + 1, hi)]
        )


@dataclass(frozen=True)
class PenaltyMatrix:
    """Symmetric positive semidefinite penalty on basis coefficients.

    ``kind`` is ``"difference"`` (``param`` = difference order) or
    ``"derivative_mixture"`` (``param`` = level/curvature mixing weight).
    """

    matrix: np.ndarray
    kind: str
    param: float

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("penalty matrix must be square")
        if not np.allclose(m, m.T, atol=1e-12):
            raise ValueError("penalty matrix must be symmetric to 1e-12")
        eigs = np.linalg.eigvalsh(m)
        scale = max(eigs[-1], 1.0)
        if eigs[0] < -1e-10 * scale:
            raise ValueError("penalty matrix must be positive semidefinite")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def make_basis(x_values, num_basis: int, degree: int = 3, placement: str = "quantile") -> BSplineBasis:
    """Build a clamped B-spline basis spanning the range of ``x_values``.

    Parameters
    ----------
    x_values : array_like
        Observed covariate values; at least two distinct points.
    num_basis : int
        Number of basis functions; must exceed ``degree``.
    degree : int
        Polynomial degree of each piece (cubic by default).
    placement : str
        ``"quantile"`` places interior knots at empirical quantiles of
        ``x_values`` (robust to skewed covariates); ``"uniform"``
        spaces them equally between the boundary knots.
    """
    x = np.asarray(x_values, dtype=float).ravel()
    if x.size < 2 or np.ptp(x) == 0.0:
        raise DegenerateCovariateError("covariate needs at least two distinct values")
    if num_basis <= degree:
        raise ValueError(f"num_basis must exceed degree ({num_basis} <= {degree})")
    lo, hi = float(x.min()), float(x.max())
    n_interior = num_basis - degree - 1
    if n_interior == 0:
        interior = np.empty(0)
    elif placement == "quantile":
        probs = np.arange(1, n_interior + 1) / (n_interior + 1)
        interior = np.quantile(x, probs)
    elif placement == "uniform":
        interior = np.linspace(lo, hi, n_interior + 2)[1:-1]
    else:
        raise ValueError(f"unknown knot placement {placement!r}")
    if interior.size and not np.all(np.diff(interior) > 0.0):
        raise DegenerateCovariateError(
            "tied covariate quantiles produced coincident knots; reduce num_basis"
        )
    return BSplineBasis(degree=degree, interior_knots=interior, boundary=(lo, hi))


def evaluate_basis(basis: BSplineBasis, x_values) -> np.ndarray:
    """Evaluate every basis function at ``x_values``; rows sum to one.

    Points outside the basis range are clamped to the boundary (with a
    warning) rather than extrapolated.
    """
    x = np.atleast_1d(np.asarray(x_values, dtype=float))
    lo, hi = basis.boundary
    if np.any(x < lo) or np.any(x > hi):
        warnings.warn("covariate values outside the basis range were clamped", stacklevel=2)
        x = np.clip(x, lo, hi)
    design = BSpline.design_matrix(x, basis.knot_vector, basis.degree)
    return design.toarray()


def difference_penalty(num_basis: int, order: int = 2) -> PenaltyMatrix:
    """Penalty ``D'D`` where ``D`` is the order-th forward difference operator."""
    if not 0 < order < num_basis:
        raise ValueError(f"difference order must satisfy 0 < order < num_basis, got {order}")
    d = np.diff(np.eye(num_basis), n=order, axis=0)
    return PenaltyMatrix(matrix=d.T @ d, kind="difference", param=float(order))


def derivative_penalty(basis: BSplineBasis, grid, deriv_order: int) -> np.ndarray:
    """Gram matrix of basis-function derivatives over ``grid``.

    Approximates ``integral of B^(d)(t) B^(d)(t)' dt`` with the
    trapezoid rule; ``deriv_order`` 0 gives the level Gram, 2 the
    curvature Gram.
    """
    if deriv_order not in (0, 2):
        raise ValueError("deriv_order must be 0 or 2")
    if deriv_order == 2 and basis.degree < 2:
        raise ValueError("second-derivative penalty needs degree >= 2")
    grid = np.asarray(grid, dtype=float).ravel()
    lo, hi = basis.boundary
    if grid.size < 2 or not np.all(np.diff(grid) > 0.0):
        raise ValueError("grid must be sorted with at least two points")
    if grid[0] < lo - 1e-12 or grid[-1] > hi + 1e-12:
        raise ValueError("grid must lie within the basis range")
    if deriv_order == 0:
        values = evaluate_basis(basis, grid)
    else:
        knots = basis.knot_vector
        cols = []
        for ell in range(basis.num_basis):
            coef = np.zeros(basis.num_basis)
            coef[ell] = 1.0
            cols.append(BSpline(knots, coef, basis.degree).derivative(deriv_order)(grid))
        values = np.column_stack(cols)
    w = trapezoid_weights(grid)
    gram = values.T @ (w[:, None] * values)
    return 0.5 * (gram + gram.T)


def functional_penalty(delta0, delta2, xi_pen: float) -> PenaltyMatrix:
    """Convex mixture of level and curvature Gram matrices."""
    if not 0.0 <= xi_pen <= 1.0:
        raise ValueError(f"mixture weight must lie in [0, 1], got {xi_pen}")
    d0 = np.asarray(delta0, dtype=float)
    d2 = np.asarray(delta2, dtype=float)
    if d0.shape != d2.shape:
        raise ValueError("penalty components must have matching shapes")
    mix = xi_pen * d0 + (1.0 - xi_pen) * d2
    return PenaltyMatrix(matrix=0.5 * (mix + mix.T), kind="derivative_mixture", param=float(xi_pen))


def trapezoid_weights(grid) -> np.ndarray:
    """Trapezoid-rule quadrature weights for a sorted grid."""
    g = np.asarray(grid, dtype=float).ravel()
    if g.size < 2:
        raise ValueError("quadrature needs at least two grid points")
    w = np.empty_like(g)
    w[0] = 0.5 * (g[1] - g[0])
    w[-1] = 0.5 * (g[-1] - g[-2])
    if g.size > 2:
        w[1:-1] = 0.5 * (g[2:] - g[:-2])
    return w
