"""Shared test utilities: finite-difference oracles and small fixtures.

The gradient oracles here are intentionally independent of the library's
backward passes: they only ever call forward code and difference it.
"""

from __future__ import annotations

import numpy as np

from faultadapt.model import ModelParams, map_params


def numeric_gradient(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function at x, elementwise."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = fn(x)
        flat[i] = orig - h
        down = fn(x)
        flat[i] = orig
        out[i] = (up - down) / (2.0 * h)
    return grad


def max_rel_error(a: np.ndarray, b: np.ndarray) -> float:
    """Largest elementwise relative difference with an absolute floor."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.abs(a) + np.abs(b), 1e-8)
    return float(np.max(np.abs(a - b) / denom))


def with_arrays(template: ModelParams, arrays) -> ModelParams:
    """Rebuild a ModelParams tree from arrays in traversal order."""
    it = iter(arrays)
    return map_params(lambda _: next(it), template)


def param_numeric_gradient(fn, params: ModelParams, h: float = 1e-5) -> ModelParams:
    """Central finite differences of a scalar function of ModelParams."""
    arrays = [a.copy() for a in params.arrays()]
    grads = []
    for k, arr in enumerate(arrays):
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = fn(with_arrays(params, arrays))
            flat[i] = orig - h
            down = fn(with_arrays(params, arrays))
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return with_arrays(params, grads)


def param_max_rel_error(analytic: ModelParams, numeric: ModelParams) -> float:
    return max(
        max_rel_error(a, n) for a, n in zip(analytic.arrays(), numeric.arrays())
    )
