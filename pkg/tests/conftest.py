import numpy as np
import pytest

from funnet.basis import FunctionalCurve, make_fourier_basis
from funnet.dataset import dataset_from_curves
from funnet.network import FnnConfig, init_model
from funnet.quadrature import feature_integrals


def random_curves(rng, n, basis, scale=1.0):
    return [
        FunctionalCurve(basis=basis, coefs=rng.normal(scale=scale, size=basis.size))
        for _ in range(n)
    ]


def linear_dataset(rng, n=40, data_size=7, beta_coefs=None, noise_sd=0.0,
                   domain=(0.0, 1.0)):
    """y = integral(beta x) + noise with x random in a Fourier basis.

    Returns (dataset, beta curve). Orthonormal basis, so the integral is
    the coefficient dot product when beta shares the basis.
    """
    basis = make_fourier_basis(domain, data_size)
    if beta_coefs is None:
        beta_coefs = rng.normal(size=data_size)
    beta_coefs = np.asarray(beta_coefs, dtype=np.float64)
    curves = random_curves(rng, n, basis)
    y = np.array([c.coefs @ beta_coefs for c in curves])
    if noise_sd:
        y = y + rng.normal(scale=noise_sd, size=n)
    ds = dataset_from_curves([curves], response=y)
    beta = FunctionalCurve(basis=basis, coefs=beta_coefs)
    return ds, beta


def tiny_model(rng, n_functional=1, basis_size=3, n_scalar=0,
               hidden=(4,), activations=None, seed=None):
    """A small random-config model plus a matching random feature batch."""
    if activations is None:
        activations = tuple(
            ("identity", "relu", "sigmoid")[rng.integers(3)] for _ in hidden
        )
    config = FnnConfig(
        weight_basis_sizes=(basis_size,) * n_functional,
        hidden_sizes=tuple(hidden),
        activations=activations,
        seed=int(rng.integers(2**31)) if seed is None else seed,
    )
    model = init_model(config, n_scalar=n_scalar)
    return model


def model_batch(rng, model, n=6):
    total = sum(model.config.weight_basis_sizes)
    features = rng.normal(size=(n, total))
    scalars = rng.normal(size=(n, model.n_scalar))
    targets = rng.normal(size=n)
    return features, scalars, targets


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)
