"""Basis systems and functional curves.

Defines Fourier and B-spline basis systems over a closed interval,
least-squares smoothing of discrete longitudinal samples into coefficient
vectors, analytic derivatives, and roughness penalty matrices.

The Fourier system is orthonormal under the L2 inner product on its
domain: the constant is 1/sqrt(P) and each sin/cos pair is scaled by
1/sqrt(P/2), with P the period (by default the domain length).
Evaluation internally maps the domain to [0, 1] so conditioning does not
depend on the original units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .errors import (
    ConfigError,
    OutOfDomainError,
    RankError,
    UnderdeterminedError,
    UnsupportedError,
)

FOURIER = "fourier"
BSPLINE = "bspline"

# Fraction of the domain length tolerated outside the interval before an
# evaluation point is rejected; survives round-tripped endpoints.
_DOMAIN_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class BasisSystem:
    """A finite basis over a closed interval.

    Attributes:
        kind: "fourier" or "bspline".
        domain: (t_min, t_max) in original units.
        size: number of basis functions M.
        order: polynomial order (B-spline only; 0 for Fourier).
        knots: full clamped knot vector in original units (B-spline only).
        period: period of the trigonometric terms (Fourier only). Defaults
            to the domain length, which makes the system orthonormal on the
            domain; other periods are used to represent functions whose
            frequencies are not harmonics of the domain length.
    """

    kind: str
    domain: tuple[float, float]
    size: int
    order: int = 0
    knots: np.ndarray | None = field(default=None, repr=False)
    period: float | None = None

    def __post_init__(self):
        if self.kind not in (FOURIER, BSPLINE):
            raise ConfigError(f"unknown basis kind {self.kind!r}")
        lo, hi = float(self.domain[0]), float(self.domain[1])
        if not np.isfinite([lo, hi]).all() or lo >= hi:
            raise ConfigError(f"domain ({lo}, {hi}) is not a non-degenerate interval")
        if self.size < 1:
            raise ConfigError(f"basis size must be >= 1, got {self.size}")
        if self.kind == BSPLINE:
            if self.order < 1 or self.size < self.order:
                raise ConfigError(
                    f"bspline needs 1 <= order <= size, got order {self.order} "
                    f"size {self.size}"
                )
            if self.knots is None or len(self.knots) != self.size + self.order:
                raise ConfigError("bspline needs a full clamped knot vector")
        if self.period is not None and not self.period > 0:
            raise ConfigError("period must be positive")

    @property
    def length(self) -> float:
        return self.domain[1] - self.domain[0]

    def contains(self, t: np.ndarray) -> np.ndarray:
        lo, hi = self.domain
        slack = _DOMAIN_SLACK * max(self.length, 1.0)
        return (t >= lo - slack) & (t <= hi + slack)


@dataclass(frozen=True, eq=False)
class FunctionalCurve:
    """A function represented by coefficients on a :class:`BasisSystem`."""

    basis: BasisSystem
    coefs: np.ndarray

    def __post_init__(self):
        coefs = np.asarray(self.coefs, dtype=np.float64)
        if coefs.ndim != 1 or coefs.shape[0] != self.basis.size:
            raise ConfigError(
                f"coefficient vector of length {coefs.shape} does not match "
                f"basis size {self.basis.size}"
            )
        object.__setattr__(self, "coefs", coefs)

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        """Evaluate the curve at points ``t`` inside the domain."""
        return eval_basis(self.basis, t) @ self.coefs

    __call__ = evaluate


@dataclass(frozen=True)
class LongitudinalSample:
    """Discrete measurements (t_p, y_p) of one curve, times strictly increasing."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if times.ndim != 1 or values.ndim != 1 or times.size != values.size:
            raise ConfigError("times and values must be 1-D vectors of equal length")
        if times.size < 2:
            raise ConfigError("a longitudinal sample needs at least 2 points")
        if np.any(np.diff(times) <= 0):
            raise ConfigError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)


def _check_domain(domain) -> tuple[float, float]:
    lo, hi = float(domain[0]), float(domain[1])
    if not np.isfinite([lo, hi]).all() or lo >= hi:
        raise ConfigError(f"domain ({lo}, {hi}) is not a non-degenerate interval")
    return lo, hi


def make_fourier_basis(domain, size: int, period: float | None = None) -> BasisSystem:
    """Create an orthonormal Fourier basis: constant plus sin/cos pairs.

    ``size`` must be odd. With the default period (the domain length) the
    system is orthonormal on the domain.
    """
    lo, hi = _check_domain(domain)
    if size < 1 or size % 2 == 0:
        raise ConfigError(f"fourier basis size must be odd and >= 1, got {size}")
    if period is not None and period <= 0:
        raise ConfigError("period must be positive")
    return BasisSystem(kind=FOURIER, domain=(lo, hi), size=size, period=period)


def make_bspline_basis(domain, size: int, order: int = 4) -> BasisSystem:
    """Create a clamped B-spline basis with uniform interior knots."""
    lo, hi = _check_domain(domain)
    if order < 1:
        raise ConfigError(f"bspline order must be >= 1, got {order}")
    if size < order:
        raise ConfigError(f"bspline size {size} must be >= order {order}")
    breaks = np.linspace(lo, hi, size - order + 2)
    knots = np.concatenate([np.full(order - 1, lo), breaks, np.full(order - 1, hi)])
    return BasisSystem(kind=BSPLINE, domain=(lo, hi), size=size, order=order, knots=knots)


def _fourier_design(basis: BasisSystem, t: np.ndarray, deriv: int) -> np.ndarray:
    lo, _ = basis.domain
    length = basis.period if basis.period is not None else basis.length
    tp = t - lo
    out = np.empty((t.size, basis.size))
    out[:, 0] = 0.0 if deriv > 0 else 1.0 / np.sqrt(length)
    scale = 1.0 / np.sqrt(length / 2.0)
    shift = deriv * np.pi / 2.0
    n_pairs = (basis.size - 1) // 2
    for r in range(1, n_pairs + 1):
        omega = 2.0 * np.pi * r / length
        amp = scale * omega**deriv
        # d^n/dt^n sin(wt) = w^n sin(wt + n pi/2), likewise for cos
        out[:, 2 * r - 1] = amp * np.sin(omega * tp + shift)
        out[:, 2 * r] = amp * np.cos(omega * tp + shift)
    return out


def _bspline_canonical(basis: BasisSystem) -> tuple[np.ndarray, int]:
    lo, hi = basis.domain
    canon = (basis.knots - lo) / (hi - lo)
    return canon, basis.order - 1


def _bspline_design(basis: BasisSystem, t: np.ndarray, deriv: int) -> np.ndarray:
    lo, hi = basis.domain
    u = np.clip((t - lo) / (hi - lo), 0.0, 1.0)
    canon, degree = _bspline_canonical(basis)
    spline = BSpline(canon, np.eye(basis.size), degree)
    values = spline(u, nu=deriv)
    if deriv > 0:
        values *= (1.0 / (hi - lo)) ** deriv
    return values


def _design_matrix(basis: BasisSystem, t: np.ndarray, deriv: int = 0) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if not basis.contains(t).all():
        bad = t[~basis.contains(t)][0]
        raise OutOfDomainError(f"point {bad} outside domain {basis.domain}")
    if basis.kind == FOURIER:
        return _fourier_design(basis, t, deriv)
    if deriv >= basis.order:
        raise UnsupportedError(
            f"derivative order {deriv} not defined for bspline of order {basis.order}"
        )
    return _bspline_design(basis, t, deriv)


def eval_basis(basis: BasisSystem, t_grid) -> np.ndarray:
    """Evaluate all basis functions on a grid; entry (p, m) is phi_m(t_p)."""
    return _design_matrix(basis, t_grid, deriv=0)


def smooth_curve(sample: LongitudinalSample, basis: BasisSystem) -> FunctionalCurve:
    """Fit basis coefficients to a discrete sample by ordinary least squares."""
    if sample.times.size < basis.size:
        raise UnderdeterminedError(
            f"{sample.times.size} points cannot determine {basis.size} coefficients"
        )
    design = eval_basis(basis, sample.times)
    coefs, _, rank, _ = np.linalg.lstsq(design, sample.values, rcond=None)
    if rank < basis.size:
        raise RankError(f"design matrix rank {rank} < basis size {basis.size}")
    return FunctionalCurve(basis=basis, coefs=coefs)


def fourier_derivative_matrix(basis: BasisSystem, order: int = 1) -> np.ndarray:
    """Matrix D with coefs(d^n f / dt^n) = D @ coefs(f) for a Fourier basis."""
    if basis.kind != FOURIER:
        raise UnsupportedError("coefficient derivative matrix is Fourier-only")
    length = basis.period if basis.period is not None else basis.length
    single = np.zeros((basis.size, basis.size))
    for r in range(1, (basis.size - 1) // 2 + 1):
        omega = 2.0 * np.pi * r / length
        s, c = 2 * r - 1, 2 * r
        # (a sin + b cos)' = (a w) cos + (-b w) sin
        single[c, s] = omega
        single[s, c] = -omega
    return np.linalg.matrix_power(single, order)


def curve_derivative(curve: FunctionalCurve, order: int = 1) -> FunctionalCurve:
    """Differentiate a curve ``order`` times.

    Fourier bases are closed under differentiation; B-spline curves drop to
    a basis of reduced order with one endpoint multiplicity removed per
    derivative.
    """
    if order < 0:
        raise ConfigError("derivative order must be >= 0")
    if order == 0:
        return curve
    basis = curve.basis
    if basis.kind == FOURIER:
        transform = fourier_derivative_matrix(basis, order)
        return FunctionalCurve(basis=basis, coefs=transform @ curve.coefs)
    if order >= basis.order:
        raise UnsupportedError(
            f"derivative order {order} not defined for bspline of order {basis.order}"
        )
    lo, hi = basis.domain
    canon, degree = _bspline_canonical(basis)
    derived = BSpline(canon, curve.coefs.copy(), degree).derivative(order)
    scale = (1.0 / (hi - lo)) ** order
    new_size = basis.size - order
    new_basis = BasisSystem(
        kind=BSPLINE,
        domain=basis.domain,
        size=new_size,
        order=basis.order - order,
        knots=lo + derived.t * (hi - lo),
    )
    return FunctionalCurve(basis=new_basis, coefs=derived.c[:new_size] * scale)


def penalty_matrix(
    basis: BasisSystem, derivative_order: int = 2, grid_resolution: int = 1001
) -> np.ndarray:
    """Gram matrix of the derivative-order-d basis functions by quadrature.

    Entry (i, j) approximates the integral of phi_i^(d) phi_j^(d) over the
    domain; the result is symmetrized. Resolution 1001 keeps quadrature
    error well below typical penalty scales even at high frequencies.
    """
    from .quadrature import make_grid, simpson_weights

    grid = make_grid(basis.domain, grid_resolution)
    design = _design_matrix(basis, grid.points, deriv=derivative_order)
    weights = simpson_weights(grid)
    penalty = design.T @ (design * weights[:, None])
    return (penalty + penalty.T) / 2.0
