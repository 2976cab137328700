"""Composite Simpson quadrature and precomputed feature integrals.

The first layer of the functional network weights each covariate curve by
basis functions and integrates over the domain. Those integrals do not
depend on the trainable parameters, so they are computed once per dataset
and cached as a feature matrix; training then reduces to dense layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisSystem, eval_basis
from .errors import ConfigError, DomainMismatchError, NumericError

DEFAULT_GRID_RESOLUTION = 201


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Uniform grid with an odd number of points, as Simpson's rule requires."""

    points: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim != 1 or points.size < 3 or points.size % 2 == 0:
            raise ConfigError("quadrature grid needs an odd number of points >= 3")
        steps = np.diff(points)
        if np.any(steps <= 0):
            raise ConfigError("quadrature grid points must be strictly increasing")
        h = steps[0]
        if np.any(np.abs(steps - h) > 1e-12 * max(abs(h), 1.0)):
            raise ConfigError("quadrature grid spacing must be uniform")
        object.__setattr__(self, "points", points)

    @property
    def spacing(self) -> float:
        return (self.points[-1] - self.points[0]) / (self.points.size - 1)


def make_grid(domain, resolution: int = DEFAULT_GRID_RESOLUTION) -> QuadratureGrid:
    """Uniform Simpson grid over ``domain`` with ``resolution`` points."""
    lo, hi = float(domain[0]), float(domain[1])
    return QuadratureGrid(points=np.linspace(lo, hi, resolution))


def simpson_weights(grid: QuadratureGrid) -> np.ndarray:
    """Weights w with integral ~= w . f(points): (h/3)(1, 4, 2, ..., 4, 1)."""
    n = grid.points.size
    weights = np.full(n, 2.0)
    weights[1::2] = 4.0
    weights[0] = weights[-1] = 1.0
    return weights * (grid.spacing / 3.0)


def simpson(values, grid: QuadratureGrid) -> float:
    """Composite Simpson's rule for samples of f on the grid."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != grid.points.shape:
        raise ConfigError(
            f"got {values.shape[0] if values.ndim else 0} values "
            f"for a grid of {grid.points.size} points"
        )
    return float(simpson_weights(grid) @ values)


@dataclass(frozen=True, eq=False)
class FeatureTensor:
    """Integrals of weight-basis functions against each observation's curves.

    ``matrix`` has one row per observation; the columns for functional
    covariate k occupy ``slices[k]`` and hold the integrals against each of
    that covariate's weight-basis functions. Recomputable deterministically
    from the dataset, the weight bases, and the grid resolution.
    """

    matrix: np.ndarray
    weight_bases: tuple[BasisSystem, ...]
    slices: tuple[slice, ...]
    grid_resolution: int

    def value(self, observation: int, covariate: int, index: int) -> float:
        return float(self.matrix[observation, self.slices[covariate]][index])

    def block(self, covariate: int) -> np.ndarray:
        return self.matrix[:, self.slices[covariate]]

    @property
    def n_observations(self) -> int:
        return self.matrix.shape[0]

    @property
    def width(self) -> int:
        return self.matrix.shape[1]


def feature_integrals(
    dataset, weight_bases, grid_resolution: int = DEFAULT_GRID_RESOLUTION
) -> FeatureTensor:
    """Integrate every weight-basis function against every observation curve.

    For each covariate the integrand is the product of the weight basis and
    the curve's own basis expansion, both evaluated exactly on the Simpson
    grid; the quadrature is applied through a per-covariate cross matrix so
    the result is linear in the curve coefficients.
    """
    if grid_resolution < 3 or grid_resolution % 2 == 0:
        raise ConfigError("grid resolution must be odd and >= 3")
    weight_bases = tuple(weight_bases)
    if len(weight_bases) != dataset.n_functional:
        raise ConfigError(
            f"{len(weight_bases)} weight bases for {dataset.n_functional} covariates"
        )
    blocks = []
    slices = []
    offset = 0
    for k, weight_basis in enumerate(weight_bases):
        data_basis = dataset.curve_bases[k]
        if not np.allclose(weight_basis.domain, data_basis.domain, rtol=0, atol=1e-12):
            raise DomainMismatchError(
                f"weight basis domain {weight_basis.domain} does not match "
                f"covariate domain {data_basis.domain}"
            )
        grid = make_grid(weight_basis.domain, grid_resolution)
        weights = simpson_weights(grid)
        phi_w = eval_basis(weight_basis, grid.points)
        phi_d = eval_basis(data_basis, grid.points)
        cross = phi_d.T @ (phi_w * weights[:, None])
        blocks.append(dataset.curve_coefs[k] @ cross)
        slices.append(slice(offset, offset + weight_basis.size))
        offset += weight_basis.size
    matrix = np.ascontiguousarray(np.hstack(blocks))
    if not np.isfinite(matrix).all():
        raise NumericError("non-finite feature integral")
    return FeatureTensor(
        matrix=matrix,
        weight_bases=weight_bases,
        slices=tuple(slices),
        grid_resolution=grid_resolution,
    )
