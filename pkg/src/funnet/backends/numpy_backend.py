"""Pure NumPy implementation of the training kernels.

Reference semantics for the compiled core: identical layer layout
(weights [n_out, n_in], inputs [batch, n_in]), identical activation codes,
and the same mean-per-batch squared-error gradient. The compiled backend
must stay interchangeable with this module.
"""

from __future__ import annotations

import numpy as np

IDENTITY, RELU, SIGMOID = 0, 1, 2

NAME = "python"


def _activate(z: np.ndarray, code: int) -> np.ndarray:
    if code == IDENTITY:
        return z
    if code == RELU:
        return np.maximum(z, 0.0)
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def _activation_grad(z: np.ndarray, code: int) -> np.ndarray:
    if code == IDENTITY:
        return np.ones_like(z)
    if code == RELU:
        # subgradient 0 at the kink
        return (z > 0.0).astype(np.float64)
    with np.errstate(over="ignore"):
        s = 1.0 / (1.0 + np.exp(-z))
    return s * (1.0 - s)


def forward(weights, biases, activations, x) -> np.ndarray:
    """Evaluate the network on a batch; returns the scalar outputs."""
    a = x
    for w, b, code in zip(weights, biases, activations):
        a = _activate(a @ w.T + b, code)
    return np.ascontiguousarray(a[:, 0])


def grad_batch(weights, biases, activations, x, targets, masks=None):
    """Forward plus reverse sweep for the batch-mean squared error.

    ``masks`` holds an optional inverted-dropout mask per layer (None to
    skip). Returns (predictions, weight gradients, bias gradients).
    """
    n_layers = len(weights)
    if masks is None:
        masks = [None] * n_layers
    n = x.shape[0]
    pre = []
    post = [x]
    a = x
    for i in range(n_layers):
        z = a @ weights[i].T + biases[i]
        a = _activate(z, activations[i])
        if masks[i] is not None:
            a = a * masks[i]
        pre.append(z)
        post.append(a)
    yhat = np.ascontiguousarray(post[-1][:, 0])

    dws = [None] * n_layers
    dbs = [None] * n_layers
    delta = (2.0 / n) * (yhat - targets)[:, None]
    for i in range(n_layers - 1, -1, -1):
        dws[i] = delta.T @ post[i]
        dbs[i] = delta.sum(axis=0)
        if i > 0:
            da = delta @ weights[i]
            if masks[i - 1] is not None:
                da = da * masks[i - 1]
            delta = da * _activation_grad(pre[i - 1], activations[i - 1])
    return yhat, dws, dbs


def sgd_update(weights, biases, dws, dbs, lr: float) -> None:
    """In-place step: a <- a - lr * grad."""
    for w, dw in zip(weights, dws):
        w -= lr * dw
    for b, db in zip(biases, dbs):
        b -= lr * db


def adam_update(
    weights, biases, dws, dbs, m_w, m_b, v_w, v_b,
    step: int, lr: float, beta1: float, beta2: float, eps: float,
) -> None:
    """In-place Adam step with bias correction; ``step`` is 1-based."""
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    for params, grads, ms, vs in ((weights, dws, m_w, v_w), (biases, dbs, m_b, v_b)):
        for p, g, m, v in zip(params, grads, ms, vs):
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
