"""Container for scalar-on-function regression data.

A dataset holds N observations of K functional covariates (as coefficient
matrices on shared per-covariate bases), J scalar covariates, and an
optional scalar response.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .basis import BasisSystem, FunctionalCurve, LongitudinalSample, curve_derivative
from .errors import ConfigError


@dataclass(frozen=True, eq=False)
class FunctionalDataset:
    """N observations of K functional covariates, J scalars, optional response."""

    curve_coefs: tuple[np.ndarray, ...]
    curve_bases: tuple[BasisSystem, ...]
    functional_names: tuple[str, ...]
    scalars: np.ndarray
    scalar_names: tuple[str, ...]
    response: np.ndarray | None = None
    raw_samples: tuple[tuple[LongitudinalSample, ...], ...] | None = field(
        default=None, repr=False
    )

    def __post_init__(self):
        coefs = tuple(np.asarray(c, dtype=np.float64) for c in self.curve_coefs)
        if not coefs:
            raise ConfigError("dataset needs at least one functional covariate")
        n = coefs[0].shape[0]
        if len(coefs) != len(self.curve_bases) or len(coefs) != len(self.functional_names):
            raise ConfigError("coefficient blocks, bases, and names must align")
        for c, b in zip(coefs, self.curve_bases):
            if c.ndim != 2 or c.shape != (n, b.size):
                raise ConfigError(
                    f"coefficient block shape {c.shape} does not match "
                    f"({n}, {b.size})"
                )
        scalars = np.asarray(self.scalars, dtype=np.float64)
        if scalars.size == 0:
            scalars = scalars.reshape(n, len(self.scalar_names))
        else:
            scalars = scalars.reshape(n, -1)
        if scalars.shape[1] != len(self.scalar_names):
            raise ConfigError("scalar matrix width must match scalar names")
        response = self.response
        if response is not None:
            response = np.asarray(response, dtype=np.float64)
            if response.shape != (n,):
                raise ConfigError(f"response shape {response.shape} != ({n},)")
        object.__setattr__(self, "curve_coefs", coefs)
        object.__setattr__(self, "scalars", scalars)
        object.__setattr__(self, "response", response)

    @property
    def n_observations(self) -> int:
        return self.curve_coefs[0].shape[0]

    @property
    def n_functional(self) -> int:
        return len(self.curve_coefs)

    @property
    def n_scalar(self) -> int:
        return self.scalars.shape[1]

    def curve(self, observation: int, covariate: int = 0) -> FunctionalCurve:
        return FunctionalCurve(
            basis=self.curve_bases[covariate],
            coefs=self.curve_coefs[covariate][observation],
        )

    def subset(self, indices) -> "FunctionalDataset":
        indices = np.asarray(indices, dtype=np.intp)
        raw = None
        if self.raw_samples is not None:
            raw = tuple(
                tuple(per_cov[i] for i in indices) for per_cov in self.raw_samples
            )
        return replace(
            self,
            curve_coefs=tuple(c[indices] for c in self.curve_coefs),
            scalars=self.scalars[indices],
            response=None if self.response is None else self.response[indices],
            raw_samples=raw,
        )

    def with_derivative_curves(self, order: int) -> "FunctionalDataset":
        """Replace every functional covariate by its order-th derivative."""
        new_coefs = []
        new_bases = []
        for k in range(self.n_functional):
            derived = [
                curve_derivative(self.curve(i, k), order)
                for i in range(self.n_observations)
            ]
            new_bases.append(derived[0].basis)
            new_coefs.append(np.vstack([c.coefs for c in derived]))
        return replace(
            self,
            curve_coefs=tuple(new_coefs),
            curve_bases=tuple(new_bases),
            raw_samples=None,
        )


def dataset_from_curves(
    curves_per_covariate,
    functional_names=None,
    scalars=None,
    scalar_names=None,
    response=None,
    raw_samples=None,
) -> FunctionalDataset:
    """Assemble a dataset from per-covariate lists of FunctionalCurve."""
    curves_per_covariate = [list(c) for c in curves_per_covariate]
    bases = []
    coefs = []
    for curve_list in curves_per_covariate:
        bases.append(curve_list[0].basis)
        coefs.append(np.vstack([c.coefs for c in curve_list]))
    n = coefs[0].shape[0]
    if functional_names is None:
        functional_names = tuple(f"x{k}" for k in range(len(coefs)))
    if scalars is None:
        scalars = np.zeros((n, 0))
        scalar_names = ()
    elif scalar_names is None:
        scalars = np.asarray(scalars, dtype=np.float64).reshape(n, -1)
        scalar_names = tuple(f"z{j}" for j in range(scalars.shape[1]))
    return FunctionalDataset(
        curve_coefs=tuple(coefs),
        curve_bases=tuple(bases),
        functional_names=tuple(functional_names),
        scalars=scalars,
        scalar_names=tuple(scalar_names),
        response=response,
        raw_samples=raw_samples,
    )
