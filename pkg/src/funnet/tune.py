"""Grid search over network hyperparameters by K-fold cross-validation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from ._parallel import ordered_map
from .dataset import FunctionalDataset
from .errors import ConfigError
from .network import FnnConfig, predict, train


def _fold_indices(n: int, folds: int, seed: int):
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 23)))
    return np.array_split(rng.permutation(n), folds)


def kfold_mspe(
    dataset: FunctionalDataset,
    config: FnnConfig,
    folds: int,
    seed: int = 0,
    fit_predict: Optional[Callable] = None,
) -> float:
    """Cross-validated mean squared prediction error.

    A seeded shuffle splits the observations into ``folds`` parts whose
    sizes differ by at most one; each part is predicted by a model
    trained on the rest, and the squared errors are pooled over all N.
    ``fit_predict(train_ds, test_ds) -> predictions`` swaps in a
    different model family; the default trains the network config.
    """
    n = dataset.n_observations
    if dataset.response is None:
        raise ConfigError("cross-validation needs a dataset with a response")
    if folds < 2:
        raise ConfigError("cross-validation needs at least 2 folds")
    if folds > n:
        raise ConfigError(f"{folds} folds exceed {n} observations")
    if fit_predict is None:
        def fit_predict(train_ds, test_ds):
            model, _ = train(train_ds, config)
            return predict(model, test_ds)
    sse = 0.0
    for test_idx in _fold_indices(n, folds, seed):
        train_idx = np.setdiff1d(np.arange(n), test_idx)
        test_ds = dataset.subset(test_idx)
        resid = np.asarray(fit_predict(dataset.subset(train_idx), test_ds))
        resid = resid - test_ds.response
        sse += float(resid @ resid)
    return sse / n


@dataclass(frozen=True)
class TuneGrid:
    """Cartesian grid of FnnConfig overrides.

    ``candidates`` maps FnnConfig field names to candidate lists; every
    combination is applied on top of ``base``. Combinations enumerate in
    the order keys are listed, last key fastest, and that order settles
    ties (first minimum wins).
    """

    candidates: Mapping[str, Sequence]
    folds: int
    seed: int = 0
    base: FnnConfig = field(
        default_factory=lambda: FnnConfig(weight_basis_sizes=(5,))
    )

    def __post_init__(self):
        if self.folds < 2:
            raise ConfigError("tuning needs at least 2 folds")
        candidates = {str(k): list(v) for k, v in self.candidates.items()}
        if any(len(v) == 0 for v in candidates.values()):
            raise ConfigError("every candidate list must be non-empty")
        object.__setattr__(self, "candidates", candidates)
        for combo in self.combinations():
            self.build_config(combo)  # fail fast on invalid combinations

    def combinations(self) -> list:
        """All grids cells, as dicts, in documented evaluation order."""
        keys = list(self.candidates.keys())
        if not keys:
            return [{}]
        return [
            dict(zip(keys, values))
            for values in itertools.product(*(self.candidates[k] for k in keys))
        ]

    def build_config(self, combo: Mapping) -> FnnConfig:
        return replace(self.base, **combo)


def grid_search(
    dataset: FunctionalDataset,
    grid: TuneGrid,
    threads: int = 1,
) -> tuple:
    """Evaluate every grid cell; returns (best config, table).

    The table lists one row per cell, in evaluation order, with the
    cell's overrides, its MSPE, and any training error (such cells score
    infinity rather than aborting the search). The winning config is the
    first row attaining the minimal MSPE.
    """
    combos = grid.combinations()

    def evaluate(combo):
        config = grid.build_config(combo)
        try:
            score = kfold_mspe(dataset, config, grid.folds, grid.seed)
        except Exception as exc:  # recorded, not fatal
            return np.inf, f"{type(exc).__name__}: {exc}"
        if not np.isfinite(score):
            return np.inf, "diverged: non-finite cross-validation error"
        return float(score), ""

    results = ordered_map(evaluate, combos, threads)
    table = [
        {**combo, "mspe": score, "error": message}
        for combo, (score, message) in zip(combos, results)
    ]
    scores = np.asarray([score for score, _ in results])
    if not np.isfinite(scores).any():
        raise ConfigError("every grid cell failed to train")
    best = int(np.argmin(scores))
    return grid.build_config(combos[best]), table
