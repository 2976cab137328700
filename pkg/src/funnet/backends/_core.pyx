# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled training kernels.

Mirrors numpy_backend exactly: same call signatures, same activation
codes, same batch-mean gradient convention. Networks here are small
(tens of units), so plain typed loops beat BLAS dispatch overhead.
"""

from libc.math cimport exp as c_exp, sqrt as c_sqrt

import numpy as np

IDENTITY, RELU, SIGMOID = 0, 1, 2

NAME = "compiled"


cdef void _dense_act(double[:, ::1] a_in, double[:, ::1] w, double[::1] b,
                     int code, double[:, ::1] z_out, double[:, ::1] a_out) noexcept:
    cdef Py_ssize_t n = a_in.shape[0], d_in = a_in.shape[1], d_out = w.shape[0]
    cdef Py_ssize_t i, j, o
    cdef double acc, s
    for i in range(n):
        for o in range(d_out):
            acc = b[o]
            for j in range(d_in):
                acc += a_in[i, j] * w[o, j]
            z_out[i, o] = acc
            if code == 1:
                a_out[i, o] = acc if acc > 0.0 else 0.0
            elif code == 2:
                a_out[i, o] = 1.0 / (1.0 + c_exp(-acc))
            else:
                a_out[i, o] = acc


cdef void _apply_mask(double[:, ::1] a, double[:, ::1] mask) noexcept:
    cdef Py_ssize_t i, j
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            a[i, j] *= mask[i, j]


def forward(list weights, list biases, activations, x):
    """Evaluate the network on a batch; returns the scalar outputs."""
    cdef double[:, ::1] a = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] w
    cdef double[::1] b
    cdef Py_ssize_t i, n_layers = len(weights)
    cdef int code
    z_buf = None
    a_buf = None
    for i in range(n_layers):
        w = weights[i]
        b = biases[i]
        code = activations[i]
        z_buf = np.empty((a.shape[0], w.shape[0]), dtype=np.float64)
        a_buf = np.empty((a.shape[0], w.shape[0]), dtype=np.float64)
        _dense_act(a, w, b, code, z_buf, a_buf)
        a = a_buf
    return np.ascontiguousarray(np.asarray(a)[:, 0])


def grad_batch(list weights, list biases, activations, x, targets, masks=None):
    """Forward plus reverse sweep for the batch-mean squared error.

    ``masks`` holds an optional inverted-dropout mask per layer (None to
    skip). Returns (predictions, weight gradients, bias gradients).
    """
    cdef Py_ssize_t n_layers = len(weights)
    if masks is None:
        masks = [None] * n_layers
    x = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] y = np.ascontiguousarray(targets, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, o, j, layer
    cdef int code
    cdef double[:, ::1] w, a_prev, z, delta, new_delta
    cdef double g, s

    pre = []
    post = [x]
    a_cur = x
    for layer in range(n_layers):
        w = weights[layer]
        z_buf = np.empty((n, w.shape[0]), dtype=np.float64)
        a_buf = np.empty((n, w.shape[0]), dtype=np.float64)
        _dense_act(a_cur, w, biases[layer], <int> activations[layer], z_buf, a_buf)
        if masks[layer] is not None:
            _apply_mask(a_buf, masks[layer])
        pre.append(z_buf)
        post.append(a_buf)
        a_cur = a_buf
    yhat = np.ascontiguousarray(np.asarray(post[n_layers])[:, 0])

    dws = [None] * n_layers
    dbs = [None] * n_layers
    cdef double[::1] yh = yhat
    delta_buf = np.empty((n, 1), dtype=np.float64)
    delta = delta_buf
    for i in range(n):
        delta[i, 0] = (2.0 / n) * (yh[i] - y[i])

    for layer in range(n_layers - 1, -1, -1):
        a_prev = post[layer]
        w = weights[layer]
        dw_buf = np.empty((w.shape[0], w.shape[1]), dtype=np.float64)
        db_buf = np.empty(w.shape[0], dtype=np.float64)
        _accumulate_grads(delta, a_prev, dw_buf, db_buf)
        dws[layer] = dw_buf
        dbs[layer] = db_buf
        if layer > 0:
            z = pre[layer - 1]
            code = activations[layer - 1]
            nd_buf = np.empty((n, w.shape[1]), dtype=np.float64)
            new_delta = nd_buf
            for i in range(n):
                for j in range(w.shape[1]):
                    g = 0.0
                    for o in range(w.shape[0]):
                        g += delta[i, o] * w[o, j]
                    new_delta[i, j] = g
            if masks[layer - 1] is not None:
                _apply_mask(new_delta, masks[layer - 1])
            for i in range(n):
                for j in range(z.shape[1]):
                    if code == 1:
                        if z[i, j] <= 0.0:
                            new_delta[i, j] = 0.0
                    elif code == 2:
                        s = 1.0 / (1.0 + c_exp(-z[i, j]))
                        new_delta[i, j] *= s * (1.0 - s)
            delta = new_delta
    return yhat, dws, dbs


cdef void _accumulate_grads(double[:, ::1] delta, double[:, ::1] a_prev,
                            double[:, ::1] dw, double[::1] db) noexcept:
    cdef Py_ssize_t n = delta.shape[0], d_out = dw.shape[0], d_in = dw.shape[1]
    cdef Py_ssize_t i, o, j
    cdef double acc
    for o in range(d_out):
        acc = 0.0
        for i in range(n):
            acc += delta[i, o]
        db[o] = acc
        for j in range(d_in):
            acc = 0.0
            for i in range(n):
                acc += delta[i, o] * a_prev[i, j]
            dw[o, j] = acc


def sgd_update(list weights, list biases, list dws, list dbs, double lr):
    """In-place step: a <- a - lr * grad."""
    cdef double[:, ::1] w, dw
    cdef double[::1] b, db
    cdef Py_ssize_t i, o, j
    for i in range(len(weights)):
        w = weights[i]
        dw = dws[i]
        for o in range(w.shape[0]):
            for j in range(w.shape[1]):
                w[o, j] -= lr * dw[o, j]
    for i in range(len(biases)):
        b = biases[i]
        db = dbs[i]
        for o in range(b.shape[0]):
            b[o] -= lr * db[o]


cdef void _adam_flat(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
                     double lr, double b1, double b2, double eps,
                     double c1, double c2) noexcept:
    cdef Py_ssize_t i
    for i in range(p.shape[0]):
        m[i] = b1 * m[i] + (1.0 - b1) * g[i]
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i]
        p[i] -= lr * (m[i] / c1) / (c_sqrt(v[i] / c2) + eps)


def adam_update(list weights, list biases, list dws, list dbs,
                list m_w, list m_b, list v_w, list v_b,
                int step, double lr, double beta1, double beta2, double eps):
    """In-place Adam step with bias correction; ``step`` is 1-based."""
    cdef double c1 = 1.0 - beta1**step
    cdef double c2 = 1.0 - beta2**step
    cdef Py_ssize_t i
    for i in range(len(weights)):
        _adam_flat(np.ravel(weights[i]), np.ravel(dws[i]),
                   np.ravel(m_w[i]), np.ravel(v_w[i]),
                   lr, beta1, beta2, eps, c1, c2)
    for i in range(len(biases)):
        _adam_flat(biases[i], dbs[i], m_b[i], v_b[i],
                   lr, beta1, beta2, eps, c1, c2)
