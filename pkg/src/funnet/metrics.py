"""Prediction-quality summaries shared by the CLI and the studies."""

from __future__ import annotations

import numpy as np

from .errors import DataError


def _pair(y, yhat):
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape:
        raise DataError("predictions and targets differ in length")
    if y.size == 0:
        raise DataError("metrics need at least one observation")
    return y, yhat


def mspe(y, yhat) -> float:
    """Mean squared prediction error."""
    y, yhat = _pair(y, yhat)
    return float(np.mean((y - yhat) ** 2))


def r_squared(y, yhat) -> float:
    """1 - SSE / SST around the target mean."""
    y, yhat = _pair(y, yhat)
    sst = float(np.sum((y - y.mean()) ** 2))
    sse = float(np.sum((y - yhat) ** 2))
    if sst == 0.0:
        return 1.0 if sse == 0.0 else -np.inf
    return 1.0 - sse / sst


def mep(y, yhat) -> float:
    """MSPE rescaled by the population (divide-by-N) target variance."""
    y, yhat = _pair(y, yhat)
    var = float(np.var(y))
    if var == 0.0:
        raise DataError("target variance is zero; MEP undefined")
    return mspe(y, yhat) / var
