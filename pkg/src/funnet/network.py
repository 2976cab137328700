"""Feed-forward networks on functional inputs.

The first layer consumes the feature integrals of each curve on its
weight basis together with any scalar covariates; later layers are
ordinary dense layers. The output layer always has one identity unit.
Training follows plain mini-batch descent (SGD or Adam) with optional
inverted dropout and validation-based early stopping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .backends import kernels
from .basis import BasisSystem, make_bspline_basis, make_fourier_basis
from .dataset import FunctionalDataset
from .errors import ConfigError, DataError, NumericError
from .quadrature import DEFAULT_GRID_RESOLUTION, FeatureTensor, feature_integrals

ACTIVATIONS = ("identity", "relu", "sigmoid")
_ACT_CODE = {name: i for i, name in enumerate(ACTIVATIONS)}

# fixed stream ids hung off the user seed, so init / split / shuffle /
# dropout never share draws
_INIT, _SPLIT, _SHUFFLE, _DROPOUT = 0, 1, 2, 3


def _stream(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((int(seed), stream)))


@dataclass(frozen=True)
class EarlyStopping:
    """Validation-based stopping rule.

    Training halts after ``patience`` consecutive epochs in which the
    validation loss fails to improve on the best seen by more than
    ``min_delta``; the parameters from the best epoch are restored.
    """

    validation_fraction: float = 0.2
    patience: int = 10
    min_delta: float = 1e-4

    def __post_init__(self):
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must lie in (0, 1)")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.min_delta < 0.0:
            raise ConfigError("min_delta must be >= 0")


@dataclass(frozen=True)
class FnnConfig:
    """Hyperparameters for one network.

    ``weight_basis_sizes`` fixes M_k, the number of weight-basis
    functions per functional covariate. ``activations`` and
    ``dropout_rates`` accept a single value broadcast across hidden
    layers. The output layer is always a single identity unit and is
    not listed in ``hidden_sizes``.
    """

    weight_basis_sizes: Sequence[int]
    hidden_sizes: Sequence[int] = (32,)
    activations: Sequence[str] | str = "relu"
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 500
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    dropout_rates: Sequence[float] | float = 0.0
    early_stopping: Optional[EarlyStopping] = field(default_factory=EarlyStopping)
    seed: int = 0
    weight_basis_kind: str = "fourier"
    bspline_order: int = 4
    grid_resolution: int = DEFAULT_GRID_RESOLUTION
    standardize_response: bool = False
    record_weights: bool = False

    def __post_init__(self):
        ms = tuple(int(m) for m in np.atleast_1d(self.weight_basis_sizes))
        hs = tuple(int(h) for h in np.atleast_1d(self.hidden_sizes))
        if not ms or any(m < 1 for m in ms):
            raise ConfigError("weight_basis_sizes must be positive")
        if not hs or any(h < 1 for h in hs):
            raise ConfigError("hidden_sizes must be positive")
        acts = self.activations
        if isinstance(acts, str):
            acts = (acts,) * len(hs)
        acts = tuple(str(a) for a in acts)
        if len(acts) != len(hs):
            raise ConfigError("need one activation per hidden layer")
        for a in acts:
            if a not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {a!r}")
        drops = self.dropout_rates
        if np.isscalar(drops):
            drops = (float(drops),) * len(hs)
        drops = tuple(float(p) for p in drops)
        if len(drops) != len(hs):
            raise ConfigError("need one dropout rate per hidden layer")
        if any(not 0.0 <= p < 1.0 for p in drops):
            raise ConfigError("dropout rates must lie in [0, 1)")
        if self.learning_rate < 0:
            # 0 is allowed as a degenerate no-op (useful for tests)
            raise ConfigError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.weight_basis_kind not in ("fourier", "bspline"):
            raise ConfigError(f"unknown weight_basis_kind {self.weight_basis_kind!r}")
        if self.early_stopping is not None and not isinstance(self.early_stopping, EarlyStopping):
            raise ConfigError("early_stopping must be an EarlyStopping or None")
        object.__setattr__(self, "weight_basis_sizes", ms)
        object.__setattr__(self, "hidden_sizes", hs)
        object.__setattr__(self, "activations", acts)
        object.__setattr__(self, "dropout_rates", drops)

    @property
    def total_basis_size(self) -> int:
        return sum(self.weight_basis_sizes)

    @property
    def n_functional(self) -> int:
        return len(self.weight_basis_sizes)


@dataclass
class FnnModel:
    """Parameter container plus what prediction needs to rebuild features.

    ``weights``/``biases`` hold every layer including the output unit;
    the first matrix is the concatenation [C | W_scalar] over the
    functional blocks and scalar covariates. Weight bases, grid
    resolution and standardization constants are attached by train().
    """

    config: FnnConfig
    n_scalar: int
    weights: list
    biases: list
    activation_codes: tuple
    weight_bases: Optional[tuple] = None
    grid_resolution: Optional[int] = None
    y_center: float = 0.0
    y_scale: float = 1.0
    scalar_center: Optional[np.ndarray] = None
    scalar_scale: Optional[np.ndarray] = None

    @property
    def n_hidden_layers(self) -> int:
        return len(self.weights) - 1

    @property
    def first_layer_coefs(self) -> np.ndarray:
        """View of C, [n_1 x sum(M_k)]."""
        return self.weights[0][:, : self.config.total_basis_size]

    @property
    def first_layer_scalar_weights(self) -> np.ndarray:
        """View of the scalar-covariate block, [n_1 x J]."""
        return self.weights[0][:, self.config.total_basis_size:]

    @property
    def first_layer_bias(self) -> np.ndarray:
        return self.biases[0]

    @property
    def dense_layers(self) -> list:
        """(weights, bias) pairs for every layer past the first."""
        return list(zip(self.weights[1:], self.biases[1:]))

    def coef_block(self, k: int) -> np.ndarray:
        """View of C restricted to functional covariate ``k``."""
        sizes = self.config.weight_basis_sizes
        start = sum(sizes[:k])
        return self.weights[0][:, start: start + sizes[k]]

    @property
    def first_layer_parameter_count(self) -> int:
        return (self.config.total_basis_size + self.n_scalar + 1) * self.config.hidden_sizes[0]

    @property
    def n_parameters(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def parameter_copy(self) -> tuple:
        return ([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def set_parameters(self, params: tuple) -> None:
        ws, bs = params
        for w, src in zip(self.weights, ws):
            w[...] = src
        for b, src in zip(self.biases, bs):
            b[...] = src


@dataclass
class Gradients:
    """Batch-averaged partials, same layout as the model parameters."""

    weights: list
    biases: list


@dataclass
class AdamState:
    """First/second moment accumulators and the 1-based step counter."""

    m_weights: list
    m_biases: list
    v_weights: list
    v_biases: list
    step: int = 0


@dataclass
class TrainRecord:
    """Per-epoch traces from one training run.

    ``train_loss`` is the mean squared error per epoch on the training
    split, ``train_loss_sum`` the corresponding sum. Weight snapshots,
    when recorded, start at epoch 0 (the freshly initialized model).
    """

    train_loss: np.ndarray
    train_loss_sum: np.ndarray
    val_loss: Optional[np.ndarray]
    weight_snapshots: Optional[tuple]
    snapshot_epochs: Optional[np.ndarray]
    stopped_epoch: int
    best_epoch: int


def init_model(config: FnnConfig, n_scalar: int = 0, seed: Optional[int] = None) -> FnnModel:
    """Fresh model with uniform Glorot weights and zero biases.

    Each layer (the [C | W_scalar] block included) is drawn uniformly on
    +/- sqrt(6 / (fan_in + fan_out)). Deterministic in (config, seed);
    ``seed`` defaults to ``config.seed``.
    """
    if n_scalar < 0:
        raise ConfigError("n_scalar must be >= 0")
    if seed is None:
        seed = config.seed
    rng = _stream(seed, _INIT)
    dims = [config.total_basis_size + n_scalar, *config.hidden_sizes, 1]
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    codes = tuple(_ACT_CODE[a] for a in config.activations) + (_ACT_CODE["identity"],)
    return FnnModel(
        config=config,
        n_scalar=n_scalar,
        weights=weights,
        biases=biases,
        activation_codes=codes,
    )


def _stack_inputs(model: FnnModel, features, scalars) -> np.ndarray:
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if features.shape[1] != model.config.total_basis_size:
        raise DataError(
            f"feature rows have width {features.shape[1]}, "
            f"model expects {model.config.total_basis_size}"
        )
    if model.n_scalar:
        if scalars is None:
            raise DataError("model takes scalar covariates but none were given")
        scalars = np.atleast_2d(np.asarray(scalars, dtype=np.float64))
        if scalars.shape != (features.shape[0], model.n_scalar):
            raise DataError(
                f"scalar block has shape {scalars.shape}, "
                f"expected {(features.shape[0], model.n_scalar)}"
            )
        return np.ascontiguousarray(np.hstack([features, scalars]))
    return np.ascontiguousarray(features)


def forward(model: FnnModel, features, scalars=None):
    """Network output for feature rows (integrated curves) and scalars.

    A single 1-D feature row returns a float; a matrix returns a vector.
    No response de-standardization happens here; see predict().
    """
    single = np.asarray(features).ndim == 1
    x = _stack_inputs(model, features, scalars)
    out = kernels.forward(model.weights, model.biases, model.activation_codes, x)
    return float(out[0]) if single else out


def loss_mse(predictions, targets) -> float:
    """Sum of squared errors. The per-batch mean used by the optimizers
    is this quantity divided by the batch size."""
    predictions = np.asarray(predictions, dtype=np.float64).ravel()
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if predictions.shape != targets.shape:
        raise DataError("predictions and targets differ in length")
    if predictions.size == 0:
        raise DataError("loss needs at least one observation")
    diff = predictions - targets
    return float(diff @ diff)


def gradients(model: FnnModel, features, scalars, targets) -> Gradients:
    """Backpropagated partials of the batch-mean squared error."""
    x = _stack_inputs(model, features, scalars)
    y = np.asarray(targets, dtype=np.float64).ravel()
    if y.shape[0] != x.shape[0]:
        raise DataError("targets do not match the batch size")
    if y.size == 0:
        raise DataError("gradient needs a non-empty batch")
    _, dws, dbs = kernels.grad_batch(
        model.weights, model.biases, model.activation_codes, x, y
    )
    return Gradients(weights=dws, biases=dbs)


def sgd_step(model: FnnModel, grads: Gradients, learning_rate: float) -> FnnModel:
    """In-place update a <- a - lr * grad; returns the same model."""
    kernels.sgd_update(model.weights, model.biases, grads.weights, grads.biases,
                       float(learning_rate))
    return model


def init_adam_state(model: FnnModel) -> AdamState:
    return AdamState(
        m_weights=[np.zeros_like(w) for w in model.weights],
        m_biases=[np.zeros_like(b) for b in model.biases],
        v_weights=[np.zeros_like(w) for w in model.weights],
        v_biases=[np.zeros_like(b) for b in model.biases],
    )


def adam_step(
    model: FnnModel,
    grads: Gradients,
    state: AdamState,
    learning_rate: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """One bias-corrected Adam update in place; returns (model, state)."""
    state.step += 1
    kernels.adam_update(
        model.weights, model.biases, grads.weights, grads.biases,
        state.m_weights, state.m_biases, state.v_weights, state.v_biases,
        state.step, float(learning_rate), float(beta1), float(beta2), float(eps),
    )
    return model, state


def default_weight_bases(dataset: FunctionalDataset, config: FnnConfig) -> tuple:
    """One weight basis per covariate on that covariate's domain."""
    if dataset.n_functional != config.n_functional:
        raise DataError(
            f"dataset has {dataset.n_functional} functional covariates, "
            f"config expects {config.n_functional}"
        )
    bases = []
    for curve_basis, size in zip(dataset.curve_bases, config.weight_basis_sizes):
        if config.weight_basis_kind == "fourier":
            bases.append(make_fourier_basis(curve_basis.domain, size))
        else:
            bases.append(make_bspline_basis(curve_basis.domain, size, config.bspline_order))
    return tuple(bases)


def _averaged_coefs(model: FnnModel) -> tuple:
    return tuple(
        model.coef_block(k).mean(axis=0).copy()
        for k in range(model.config.n_functional)
    )


def _epoch_losses(model, x, y, n_total):
    out = kernels.forward(model.weights, model.biases, model.activation_codes, x)
    diff = out - y
    sse = float(diff @ diff)
    return sse / n_total, sse


def train(
    dataset: FunctionalDataset,
    config: FnnConfig,
    weight_bases: Optional[tuple] = None,
) -> tuple:
    """Fit a network to a dataset; returns (model, record).

    Feature integrals are computed once up front. Each epoch shuffles
    the training split with a seeded generator and walks it in
    mini-batches (last one may be short). Losses are recorded with
    dropout off, on the standardized scale when standardization is on.
    With early stopping active the parameters from the best validation
    epoch are restored before returning.
    """
    if dataset.response is None:
        raise DataError("training needs a dataset with a response")
    n = dataset.n_observations
    if n < 1:
        raise DataError("training needs at least one observation")
    if weight_bases is None:
        weight_bases = default_weight_bases(dataset, config)
    elif len(weight_bases) != config.n_functional:
        raise ConfigError("one weight basis per functional covariate required")
    for basis, size in zip(weight_bases, config.weight_basis_sizes):
        if basis.size != size:
            raise ConfigError("weight basis sizes disagree with the config")

    ft = feature_integrals(dataset, weight_bases, config.grid_resolution)
    y = np.asarray(dataset.response, dtype=np.float64).copy()

    model = init_model(config, n_scalar=dataset.n_scalar)
    model.weight_bases = tuple(weight_bases)
    model.grid_resolution = config.grid_resolution

    scalars = dataset.scalars
    if config.standardize_response:
        model.y_center = float(y.mean())
        scale = float(y.std())
        model.y_scale = scale if scale > 0 else 1.0
        y = (y - model.y_center) / model.y_scale
        if dataset.n_scalar:
            model.scalar_center = scalars.mean(axis=0)
            sd = scalars.std(axis=0)
            model.scalar_scale = np.where(sd > 0, sd, 1.0)
            scalars = (scalars - model.scalar_center) / model.scalar_scale

    x = ft.matrix
    if dataset.n_scalar:
        x = np.hstack([x, scalars])
    x = np.ascontiguousarray(x)

    stopping = config.early_stopping
    if stopping is not None:
        n_val = int(round(stopping.validation_fraction * n))
        if n_val < 1 or n - n_val < 1:
            raise ConfigError(
                f"validation split of {n} observations at fraction "
                f"{stopping.validation_fraction} leaves an empty part"
            )
        perm = _stream(config.seed, _SPLIT).permutation(n)
        val_idx = perm[:n_val]
        train_idx = np.sort(perm[n_val:])
        x_val = np.ascontiguousarray(x[val_idx])
        y_val = y[val_idx]
    else:
        train_idx = np.arange(n)
        x_val = y_val = None
    x_train = np.ascontiguousarray(x[train_idx])
    y_train = y[train_idx]
    n_train = x_train.shape[0]

    shuffle_rng = _stream(config.seed, _SHUFFLE)
    dropout_rng = _stream(config.seed, _DROPOUT)
    adam = init_adam_state(model) if config.optimizer == "adam" else None
    use_dropout = any(p > 0 for p in config.dropout_rates)

    train_loss = []
    train_loss_sum = []
    val_loss = [] if stopping is not None else None
    snapshots = [_averaged_coefs(model)] if config.record_weights else None

    best_val = np.inf
    best_epoch = 0
    best_params = model.parameter_copy() if stopping is not None else None
    strikes = 0
    epochs_run = 0

    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n_train)
        for start in range(0, n_train, config.batch_size):
            idx = order[start: start + config.batch_size]
            xb = np.ascontiguousarray(x_train[idx])
            yb = y_train[idx]
            masks = None
            if use_dropout:
                masks = []
                for h, p in zip(config.hidden_sizes, config.dropout_rates):
                    if p > 0:
                        keep = dropout_rng.random((xb.shape[0], h)) >= p
                        masks.append(keep.astype(np.float64) / (1.0 - p))
                    else:
                        masks.append(None)
                masks.append(None)
            _, dws, dbs = kernels.grad_batch(
                model.weights, model.biases, model.activation_codes, xb, yb, masks
            )
            if adam is not None:
                adam.step += 1
                kernels.adam_update(
                    model.weights, model.biases, dws, dbs,
                    adam.m_weights, adam.m_biases, adam.v_weights, adam.v_biases,
                    adam.step, config.learning_rate,
                    config.adam_beta1, config.adam_beta2, config.adam_eps,
                )
            else:
                kernels.sgd_update(model.weights, model.biases, dws, dbs,
                                   config.learning_rate)

        epochs_run = epoch
        mean_tr, sum_tr = _epoch_losses(model, x_train, y_train, n_train)
        if not np.isfinite(mean_tr):
            raise NumericError(
                f"training diverged at epoch {epoch} (non-finite loss); "
                f"reduce the learning rate"
            )
        train_loss.append(mean_tr)
        train_loss_sum.append(sum_tr)
        if snapshots is not None:
            snapshots.append(_averaged_coefs(model))
        if stopping is not None:
            mean_val, _ = _epoch_losses(model, x_val, y_val, x_val.shape[0])
            val_loss.append(mean_val)
            if mean_val < best_val - stopping.min_delta:
                best_val = mean_val
                best_epoch = epoch
                best_params = model.parameter_copy()
                strikes = 0
            else:
                strikes += 1
                if strikes >= stopping.patience:
                    break

    if stopping is not None:
        if best_epoch == 0:
            # no epoch improved on +inf - min_delta can't happen, but a
            # fully flat run keeps epoch 1 semantics via the first pass
            best_epoch = 1
        model.set_parameters(best_params)
        if snapshots is not None:
            snapshots = snapshots[: best_epoch + 1]
            snapshots[-1] = _averaged_coefs(model)
    else:
        best_epoch = epochs_run

    record = TrainRecord(
        train_loss=np.asarray(train_loss),
        train_loss_sum=np.asarray(train_loss_sum),
        val_loss=None if val_loss is None else np.asarray(val_loss),
        weight_snapshots=None if snapshots is None else tuple(snapshots),
        snapshot_epochs=None if snapshots is None
        else np.arange(len(snapshots)),
        stopped_epoch=epochs_run,
        best_epoch=best_epoch,
    )
    return model, record


def model_features(model: FnnModel, dataset: FunctionalDataset) -> FeatureTensor:
    """Feature integrals of a dataset on the model's cached bases."""
    if model.weight_bases is None or model.grid_resolution is None:
        raise ConfigError("model has no cached weight bases; train it first")
    if dataset.n_functional != model.config.n_functional:
        raise DataError(
            f"dataset has {dataset.n_functional} functional covariates, "
            f"model expects {model.config.n_functional}"
        )
    if dataset.n_scalar != model.n_scalar:
        raise DataError(
            f"dataset has {dataset.n_scalar} scalar covariates, "
            f"model expects {model.n_scalar}"
        )
    return feature_integrals(dataset, model.weight_bases, model.grid_resolution)


def predict(model: FnnModel, dataset: FunctionalDataset) -> np.ndarray:
    """Responses for a dataset, on the original response scale."""
    if dataset.n_observations == 0:
        return np.empty(0)
    ft = model_features(model, dataset)
    scalars = dataset.scalars
    if model.scalar_center is not None:
        scalars = (scalars - model.scalar_center) / model.scalar_scale
    x = ft.matrix
    if model.n_scalar:
        x = np.hstack([x, scalars])
    out = kernels.forward(model.weights, model.biases, model.activation_codes,
                          np.ascontiguousarray(x))
    return out * model.y_scale + model.y_center
