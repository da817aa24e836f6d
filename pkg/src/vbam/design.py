"""Model declaration and design-matrix assembly.

A :class:`ModelSpec` declares the outcome family and the additive terms;
:func:`assemble` turns it plus raw data into a single stacked design
matrix with a block map tying columns back to terms.  Functional
covariate blocks are premultiplied by trapezoid quadrature weights so a
matrix-vector product with basis coefficients approximates the integral
of covariate times coefficient curve.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .basis import (
    BSplineBasis,
    PenaltyMatrix,
    derivative_penalty,
    difference_penalty,
    evaluate_basis,
    functional_penalty,
    make_basis,
    trapezoid_weights,
)

__all__ = [
    "HyperParams",
    "SmoothTerm",
    "FunctionalTerm",
    "ModelSpec",
    "DesignBundle",
    "assemble",
    "center_smooth_blocks",
]


def _per_term(value, index: int) -> float:
    if np.isscalar(value):
        return float(value)
    return float(value[index])


@dataclass(frozen=True)
class HyperParams:
    """Prior hyperparameters.

    Variance hyperparameters for the unpenalized coefficients are large
    (diffuse); inverse-gamma shape/rate pairs for the error variance and
    the per-term shrinkage scales are small (weakly informative).  The
    shrinkage pairs may be scalars (shared) or sequences (one per term).
    ``xi_pen`` mixes the level and curvature penalties for functional
    terms.
    """

    sigma_a2: float = 1e6
    sigma_b2: float = 1e6
    a_e: float = 0.01
    b_e: float = 0.01
    a_omega: float | Sequence[float] = 0.01
    b_omega: float | Sequence[float] = 0.01
    a_eta: float | Sequence[float] = 0.01
    b_eta: float | Sequence[float] = 0.01
    xi_pen: float = 0.5

    def __post_init__(self) -> None:
        for name in ("sigma_a2", "sigma_b2", "a_e", "b_e"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("a_omega", "b_omega", "a_eta", "b_eta"):
            vals = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if np.any(vals <= 0.0):
                raise ValueError(f"{name} must be strictly positive")
        if not 0.0 <= self.xi_pen <= 1.0:
            raise ValueError("xi_pen must lie in [0, 1]")

    def smooth_ab(self, index: int) -> tuple[float, float]:
        return _per_term(self.a_omega, index), _per_term(self.b_omega, index)

    def functional_ab(self, index: int) -> tuple[float, float]:
        return _per_term(self.a_eta, index), _per_term(self.b_eta, index)


@dataclass(frozen=True)
class SmoothTerm:
    name: str
    num_basis: int


@dataclass(frozen=True)
class FunctionalTerm:
    name: str
    num_basis: int
    grid: np.ndarray

    def __post_init__(self) -> None:
        g = np.asarray(self.grid, dtype=float).ravel()
        if g.size < 2 or not np.all(np.diff(g) > 0.0):
            raise ValueError(f"functional term {self.name!r} needs a sorted grid")
        object.__setattr__(self, "grid", g)


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of one additive model."""

    family: str
    scalar_terms: tuple[str, ...] = ()
    smooth_terms: tuple[SmoothTerm, ...] = ()
    functional_terms: tuple[FunctionalTerm, ...] = ()
    hyper: HyperParams = field(default_factory=HyperParams)
    degree: int = 3
    penalty_order: int = 2

    def __post_init__(self) -> None:
        if self.family not in ("gaussian", "probit"):
            raise ValueError(f"unknown outcome family {self.family!r}")
        object.__setattr__(self, "scalar_terms", tuple(self.scalar_terms))
        object.__setattr__(self, "smooth_terms", tuple(self.smooth_terms))
        object.__setattr__(self, "functional_terms", tuple(self.functional_terms))
        names = list(self.scalar_terms)
        names += [t.name for t in self.smooth_terms]
        names += [t.name for t in self.functional_terms]
        if len(set(names)) != len(names):
            raise ValueError("term names must be unique across the model")
        for term in self.smooth_terms + self.functional_terms:
            if term.num_basis <= self.degree:
                raise ValueError(
                    f"term {term.name!r}: num_basis {term.num_basis} must exceed degree {self.degree}"
                )

    @property
    def term_names(self) -> tuple[str, ...]:
        return tuple(
            ["intercept", *self.scalar_terms]
            + [t.name for t in self.smooth_terms]
            + [t.name for t in self.functional_terms]
        )


@dataclass(frozen=True)
class DesignBundle:
    """Assembled design matrix with its block structure.

    ``blocks`` maps every term (including ``"intercept"`` and each
    scalar) to its column slice of ``matrix``; ``centers`` holds the
    column means removed from penalized blocks (empty until
    :func:`center_smooth_blocks` runs).
    """

    spec: ModelSpec
    matrix: np.ndarray
    blocks: Mapping[str, slice]
    penalties: Mapping[str, PenaltyMatrix]
    bases: Mapping[str, BSplineBasis]
    quad_weights: Mapping[str, np.ndarray]
    centers: Mapping[str, np.ndarray] = field(default_factory=dict)
    scalar_shift: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def p_total(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_unpenalized(self) -> int:
        """Intercept plus scalar columns (columns before penalized blocks)."""
        return 1 + len(self.spec.scalar_terms)

    def basis_rows(self, term: str, points) -> np.ndarray:
        """Basis rows for a penalized term, matching the design columns.

        When the bundle is centered the stored column means are
        subtracted, so the rows reproduce exactly what the design block
        contributes.
        """
        rows = evaluate_basis(self.bases[term], points)
        if term in self.centers:
            rows = rows - self.centers[term]
        return rows


def _as_columns(n: int, scalar_terms, scalar_data) -> list[np.ndarray]:
    if len(scalar_terms) == 0:
        return []
    if scalar_data is None:
        raise ValueError("model declares scalar terms but no scalar data was supplied")
    if isinstance(scalar_data, Mapping):
        cols = [np.asarray(scalar_data[name], dtype=float).ravel() for name in scalar_terms]
    else:
        arr = np.asarray(scalar_data, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.shape[1] != len(scalar_terms):
            raise ValueError(
                f"scalar data has {arr.shape[1]} columns but model declares {len(scalar_terms)}"
            )
        cols = [arr[:, j] for j in range(arr.shape[1])]
    for name, col in zip(scalar_terms, cols):
        if col.shape != (n,):
            raise ValueError(f"scalar term {name!r} has {col.size} rows, expected {n}")
    return cols


def assemble(
    spec: ModelSpec,
    scalar_data=None,
    smooth_data: Mapping[str, np.ndarray] | None = None,
    functional_data: Mapping[str, np.ndarray] | None = None,
    standardize_scalars: bool = False,
) -> DesignBundle:
    """Build the stacked design matrix for ``spec`` from raw data.

    Parameters
    ----------
    spec : ModelSpec
        Model declaration.
    scalar_data : mapping or (n, p) array, optional
        Scalar covariates, one column per entry of ``spec.scalar_terms``.
    smooth_data : mapping, optional
        One n-vector per smoothed term name.
    functional_data : mapping, optional
        One (n, T) matrix per functional term name, sampled on the
        term's grid.
    standardize_scalars : bool
        Center and scale scalar columns to unit variance.

    Returns
    -------
    DesignBundle
        Matrix ``[1 | scalars | smooth blocks | weighted functional
        blocks]`` with block map, penalties, bases and quadrature
        weights.
    """
    sizes = []
    smooth_data = smooth_data or {}
    functional_data = functional_data or {}
    for term in spec.smooth_terms:
        if term.name not in smooth_data:
            raise ValueError(f"missing data for smoothed term {term.name!r}")
        sizes.append(np.asarray(smooth_data[term.name]).ravel().shape[0])
    for term in spec.functional_terms:
        if term.name not in functional_data:
            raise ValueError(f"missing data for functional term {term.name!r}")
        sizes.append(np.asarray(functional_data[term.name]).shape[0])
    if scalar_data is not None and not isinstance(scalar_data, Mapping):
        sizes.append(np.atleast_2d(np.asarray(scalar_data)).shape[0] if np.asarray(scalar_data).ndim > 1 else np.asarray(scalar_data).shape[0])
    elif isinstance(scalar_data, Mapping) and scalar_data:
        sizes.append(np.asarray(next(iter(scalar_data.values()))).ravel().shape[0])
    if not sizes:
        raise ValueError("no covariate data supplied; cannot infer the sample size")
    n = sizes[0]
    if any(s != n for s in sizes):
        raise ValueError(f"covariate row counts disagree: {sorted(set(sizes))}")

    columns: list[np.ndarray] = [np.ones(n)]
    blocks: dict[str, slice] = {"intercept": slice(0, 1)}
    penalties: dict[str, PenaltyMatrix] = {}
    bases: dict[str, BSplineBasis] = {}
    quad_weights: dict[str, np.ndarray] = {}
    scalar_shift: dict[str, tuple[float, float]] = {}
    offset = 1

    scalar_cols = _as_columns(n, spec.scalar_terms, scalar_data)
    for name, col in zip(spec.scalar_terms, scalar_cols):
        if not np.all(np.isfinite(col)):
            raise ValueError(f"scalar term {name!r} contains non-finite values")
        if standardize_scalars:
            mu, sd = float(col.mean()), float(col.std())
            if sd == 0.0:
                raise ValueError(f"scalar term {name!r} is constant; cannot standardize")
            col = (col - mu) / sd
            scalar_shift[name] = (mu, sd)
        columns.append(col)
        blocks[name] = slice(offset, offset + 1)
        offset += 1

    for i, term in enumerate(spec.smooth_terms):
        z = np.asarray(smooth_data[term.name], dtype=float).ravel()
        if not np.all(np.isfinite(z)):
            raise ValueError(f"smoothed term {term.name!r} contains non-finite values")
        basis = make_basis(z, term.num_basis, spec.degree, placement="quantile")
        block = evaluate_basis(basis, z)
        columns.append(block)
        blocks[term.name] = slice(offset, offset + term.num_basis)
        offset += term.num_basis
        bases[term.name] = basis
        penalties[term.name] = difference_penalty(term.num_basis, spec.penalty_order)

    for i, term in enumerate(spec.functional_terms):
        w = np.asarray(functional_data[term.name], dtype=float)
        if w.ndim != 2 or w.shape != (n, term.grid.size):
            raise ValueError(
                f"functional term {term.name!r} must be (n, T) = ({n}, {term.grid.size}), got {w.shape}"
            )
        if not np.all(np.isfinite(w)):
            raise ValueError(f"functional term {term.name!r} contains non-finite values")
        basis = make_basis(term.grid, term.num_basis, spec.degree, placement="uniform")
        theta = evaluate_basis(basis, term.grid)
        qw = trapezoid_weights(term.grid)
        columns.append((w * qw) @ theta)
        blocks[term.name] = slice(offset, offset + term.num_basis)
        offset += term.num_basis
        bases[term.name] = basis
        quad_weights[term.name] = qw
        penalties[term.name] = functional_penalty(
            derivative_penalty(basis, term.grid, 0),
            derivative_penalty(basis, term.grid, 2),
            spec.hyper.xi_pen,
        )

    matrix = np.column_stack(columns)
    return DesignBundle(
        spec=spec,
        matrix=matrix,
        blocks=blocks,
        penalties=penalties,
        bases=bases,
        quad_weights=quad_weights,
        scalar_shift=scalar_shift,
    )


def center_smooth_blocks(bundle: DesignBundle) -> DesignBundle:
    """Mean-center every penalized block, storing offsets for prediction.

    Removes the confounding between the intercept and the smoothed or
    functional blocks; fitted curves are then deviations from their
    sample average.  Intercept and scalar columns are untouched.
    """
    if bundle.centers:
        warnings.warn("bundle is already centered; returning it unchanged", stacklevel=2)
        return bundle
    matrix = bundle.matrix.copy()
    centers: dict[str, np.ndarray] = {}
    penalized = [t.name for t in bundle.spec.smooth_terms] + [
        t.name for t in bundle.spec.functional_terms
    ]
    for name in penalized:
        sl = bundle.blocks[name]
        means = matrix[:, sl].mean(axis=0)
        matrix[:, sl] -= means
        centers[name] = means
    return replace(bundle, matrix=matrix, centers=centers)
