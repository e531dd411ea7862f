"""Dense float64 building blocks: affine maps, activations, softmax, gradient reversal.

A matrix here is a 2-D C-contiguous float64 ndarray; every backward function
returns the exact analytic gradient of its forward counterpart so the whole
stack can be checked against central finite differences.
"""

from __future__ import annotations

import numpy as np

EPS = 1e-7


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


def as_matrix(values) -> np.ndarray:
    """Coerce input to a 2-D C-contiguous float64 array."""
    out = np.ascontiguousarray(values, dtype=np.float64)
    if out.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={out.ndim}")
    return out


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product a @ b with an explicit shape check."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def affine_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Compute x @ w + b, broadcasting the bias row over the batch."""
    if x.shape[1] != w.shape[0]:
        raise ShapeError(
            f"affine input has {x.shape[1]} columns but weight expects {w.shape[0]}"
        )
    if b.shape != (w.shape[1],):
        raise ShapeError(f"bias shape {b.shape} does not match weight columns {w.shape[1]}")
    return x @ w + b


def affine_backward(upstream: np.ndarray, x: np.ndarray, w: np.ndarray):
    """Gradients of an affine layer.

    Args:
        upstream: dL/dout with shape (n, out_dim).
        x: the forward input, shape (n, in_dim).
        w: the weight used in the forward pass, shape (in_dim, out_dim).

    Returns:
        (dx, dw, db) with the shapes of x, w and the bias row.
    """
    if upstream.shape != (x.shape[0], w.shape[1]):
        raise ShapeError(
            f"upstream shape {upstream.shape} does not match ({x.shape[0]}, {w.shape[1]})"
        )
    dx = upstream @ w.T
    dw = x.T @ upstream
    db = upstream.sum(axis=0)
    return dx, dw, db


def activation(kind: str, x: np.ndarray) -> np.ndarray:
    """Elementwise activation: 'relu', 'sigmoid' (output clamped) or 'linear'."""
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "sigmoid":
        with np.errstate(over="ignore"):
            y = 1.0 / (1.0 + np.exp(-x))
        return np.clip(y, EPS, 1.0 - EPS)
    if kind == "linear":
        return x.copy()
    raise ValueError(f"unknown activation kind: {kind!r}")


def activation_backward(kind: str, upstream: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Exact derivative of activation(kind, x), including the flat clamped regions."""
    if kind == "relu":
        return upstream * (x > 0.0)
    if kind == "sigmoid":
        with np.errstate(over="ignore"):
            y = 1.0 / (1.0 + np.exp(-x))
        grad = upstream * y * (1.0 - y)
        # The clamp makes the forward flat outside (EPS, 1-EPS).
        return np.where((y < EPS) | (y > 1.0 - EPS), 0.0, grad)
    if kind == "linear":
        return upstream.copy()
    raise ValueError(f"unknown activation kind: {kind!r}")


def softmax_rows(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted by the row max for overflow safety."""
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def grad_reverse(upstream: np.ndarray, lambda_coef: float) -> np.ndarray:
    """Backward half of the gradient reversal trick.

    The forward pass is the identity; on the way back the upstream gradient is
    scaled by -lambda_coef, which turns descent on the domain loss into ascent
    for everything upstream of the reversal point.
    """
    return (-lambda_coef) * upstream


def grad_reverse_forward(x: np.ndarray) -> np.ndarray:
    """Forward half of gradient reversal: the identity."""
    return x
