"""Functional weights recovered from a trained network.

The estimate of each beta_k(t) is the coefficient-space mean of the
first-layer functional blocks across neurons; by linearity this equals
averaging the per-neuron curves pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .basis import BasisSystem, FunctionalCurve
from .errors import ConfigError, DomainMismatchError, NotRecordedError
from .network import FnnModel, TrainRecord
from .quadrature import DEFAULT_GRID_RESOLUTION, make_grid, simpson


@dataclass(frozen=True)
class FunctionalWeightEstimate:
    """Averaged functional weights, one coefficient vector per covariate."""

    coefs: tuple
    bases: tuple
    names: tuple
    snapshots: Optional[tuple] = None
    snapshot_epochs: Optional[np.ndarray] = None

    @property
    def n_functional(self) -> int:
        return len(self.coefs)

    def curve(self, covariate: int = 0) -> FunctionalCurve:
        return FunctionalCurve(
            basis=self.bases[covariate], coefs=self.coefs[covariate]
        )

    def snapshot_curve(self, epoch_index: int, covariate: int = 0) -> FunctionalCurve:
        if self.snapshots is None:
            raise NotRecordedError("no weight snapshots were recorded")
        return FunctionalCurve(
            basis=self.bases[covariate],
            coefs=self.snapshots[epoch_index][covariate],
        )


def extract_weights(
    model: FnnModel,
    record: Optional[TrainRecord] = None,
    weight_bases: Optional[tuple] = None,
) -> FunctionalWeightEstimate:
    """Average the first-layer functional coefficients across neurons.

    Bases come from the model's cache unless given explicitly. Passing
    the model's TrainRecord carries any weight snapshots along.
    """
    bases = weight_bases if weight_bases is not None else model.weight_bases
    if bases is None:
        raise ConfigError(
            "model carries no weight bases; pass weight_bases explicitly"
        )
    bases = tuple(bases)
    if len(bases) != model.config.n_functional:
        raise ConfigError("one basis per functional covariate required")
    for basis, size in zip(bases, model.config.weight_basis_sizes):
        if basis.size != size:
            raise ConfigError("weight basis sizes disagree with the model")
    coefs = tuple(
        model.coef_block(k).mean(axis=0).copy()
        for k in range(model.config.n_functional)
    )
    snapshots = None
    snapshot_epochs = None
    if record is not None and record.weight_snapshots is not None:
        snapshots = record.weight_snapshots
        snapshot_epochs = record.snapshot_epochs
    names = tuple(f"x{k}" for k in range(len(bases)))
    return FunctionalWeightEstimate(
        coefs=coefs,
        bases=bases,
        names=names,
        snapshots=snapshots,
        snapshot_epochs=snapshot_epochs,
    )


def _shared_grid(a: FunctionalCurve, b: FunctionalCurve, resolution: int):
    if not np.allclose(a.basis.domain, b.basis.domain, rtol=0, atol=1e-12):
        raise DomainMismatchError(
            f"curves live on different domains {a.basis.domain} vs {b.basis.domain}"
        )
    return make_grid(a.basis.domain, resolution)


def imse(
    estimate: FunctionalCurve,
    truth: FunctionalCurve,
    grid_resolution: int = DEFAULT_GRID_RESOLUTION,
) -> float:
    """Integrated squared difference divided by the domain length."""
    grid = _shared_grid(estimate, truth, grid_resolution)
    diff = estimate(grid.points) - truth(grid.points)
    length = grid.points[-1] - grid.points[0]
    return simpson(diff * diff, grid) / length


def root_imse(
    estimate: FunctionalCurve,
    truth: FunctionalCurve,
    grid_resolution: int = DEFAULT_GRID_RESOLUTION,
) -> float:
    return float(np.sqrt(imse(estimate, truth, grid_resolution)))


def scale_aligned_imse(
    estimate: FunctionalCurve,
    truth: FunctionalCurve,
    grid_resolution: int = DEFAULT_GRID_RESOLUTION,
) -> tuple:
    """Diagnostic only: IMSE after the best scalar rescaling of the estimate.

    Returns (imse, scale) where scale minimizes the integrated squared
    error of scale*estimate against the truth. Reported comparisons use
    the raw, unscaled IMSE; this variant just separates shape error from
    amplitude error.
    """
    grid = _shared_grid(estimate, truth, grid_resolution)
    e = estimate(grid.points)
    t = truth(grid.points)
    denom = simpson(e * e, grid)
    scale = 0.0 if denom == 0.0 else simpson(e * t, grid) / denom
    diff = scale * e - t
    length = grid.points[-1] - grid.points[0]
    return simpson(diff * diff, grid) / length, float(scale)


def weight_trajectory(
    record: TrainRecord,
    weight_bases,
    grid_resolution: int = DEFAULT_GRID_RESOLUTION,
    names=None,
) -> dict:
    """Long-format table of the averaged weight across recorded epochs.

    Returns columns covariate / epoch / t / value; epoch 0 is the
    freshly initialized model. Raises when training did not record
    snapshots.
    """
    if record.weight_snapshots is None:
        raise NotRecordedError(
            "training was run without weight snapshots; enable record_weights"
        )
    weight_bases = tuple(weight_bases)
    if names is None:
        names = tuple(f"x{k}" for k in range(len(weight_bases)))
    cov_col = []
    epoch_col = []
    t_col = []
    value_col = []
    for epoch, snapshot in zip(record.snapshot_epochs, record.weight_snapshots):
        for name, basis, coefs in zip(names, weight_bases, snapshot):
            grid = make_grid(basis.domain, grid_resolution)
            values = FunctionalCurve(basis=basis, coefs=coefs)(grid.points)
            cov_col.extend([name] * grid.points.size)
            epoch_col.extend([int(epoch)] * grid.points.size)
            t_col.append(grid.points)
            value_col.append(values)
    return {
        "covariate": np.asarray(cov_col),
        "epoch": np.asarray(epoch_col, dtype=np.int64),
        "t": np.concatenate(t_col),
        "value": np.concatenate(value_col),
    }
