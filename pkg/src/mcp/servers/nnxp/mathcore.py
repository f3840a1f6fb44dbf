"""Activation functions, elastic-net regularization and quadratic loss.

Scalar functions take and return Python floats; the ``*_array`` variants apply
the same rule element-wise to numpy arrays and are what the propagation code
uses.  Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

from .errors import ShapeError


class ActivationKind(str, Enum):
    IDENTITY = "identity"
    ELU = "elu"
    SOFTMAX = "softmax"


# ---------------------------------------------------------------------------
# identity
# ---------------------------------------------------------------------------
def identity(x: float) -> float:
    return x


def identity_deriv(x: float) -> float:
    return 1.0


# ---------------------------------------------------------------------------
# ELU
# ---------------------------------------------------------------------------
def elu(alpha: float, x: float) -> float:
    if x >= 0:
        return x
    return alpha * math.expm1(x)


def elu_deriv(alpha: float, x: float) -> float:
    """Derivative of ``elu``; exactly ``alpha`` at zero."""
    if x > 0:
        return 1.0
    if x == 0:
        return alpha
    return elu(alpha, x) + alpha


def elu_array(alpha: float, x: np.ndarray) -> np.ndarray:
    # expm1 on the clipped branch only, so large positive x never overflows
    return np.where(x >= 0, x, alpha * np.expm1(np.minimum(x, 0.0)))


def elu_deriv_array(alpha: float, x: np.ndarray) -> np.ndarray:
    negative = alpha * np.expm1(np.minimum(x, 0.0)) + alpha
    return np.where(x > 0, 1.0, np.where(x == 0, alpha, negative))


# ---------------------------------------------------------------------------
# SoftMax
# ---------------------------------------------------------------------------
def softmax(v) -> np.ndarray:
    """Shifted softmax along the last axis.

    Subtracting the maximum keeps every exponent at or below zero, so no finite
    input can overflow.  Accepts a single vector or a stack of row vectors.
    """
    values = np.asarray(v, dtype=np.float64)
    if values.ndim == 0 or values.shape[-1] == 0:
        raise ShapeError("empty softmax input")
    if not np.all(np.isfinite(values)):
        raise ShapeError("softmax input must be finite")
    with np.errstate(over="ignore"):
        # spreads beyond the float range saturate to -inf, whose exp is 0
        shifted = values - values.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=-1, keepdims=True)


def softmax_deriv(activated: float) -> float:
    """Diagonal Jacobian term of softmax, expressed through its output."""
    return (1.0 - activated) * activated


def softmax_vjp(activated: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Exact vector-Jacobian product of softmax without building the matrix.

    Equals the diagonal term ``softmax_deriv(s) * g`` plus the rank-one
    correction ``-s * (<g, s> - s * g)`` of the off-diagonal entries.
    """
    return activated * (upstream - np.dot(upstream, activated))


# ---------------------------------------------------------------------------
# elastic net
# ---------------------------------------------------------------------------
def sgn(w: float) -> float:
    if w > 0:
        return 1.0
    if w < 0:
        return -1.0
    return 0.0


def elastic_net_penalty(w: float, lam: float) -> float:
    return lam * (abs(w) + w * w)


def elastic_net_grad(w: float, lam: float) -> float:
    return lam * (sgn(w) + 2.0 * w)


def elastic_net_penalty_total(weights, lam: float) -> float:
    """Penalty summed over a flat weight vector or a sequence of them."""
    if lam == 0:
        return 0.0
    total = 0.0
    for array in _as_arrays(weights):
        total += float(np.sum(np.abs(array) + array * array))
    return lam * total


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------
def quadratic_data_loss(targets, outputs) -> float:
    t = np.asarray(targets, dtype=np.float64)
    o = np.asarray(outputs, dtype=np.float64)
    if t.shape != o.shape:
        raise ShapeError(f"targets have length {t.size}, outputs have length {o.size}")
    diff = t - o
    return 0.5 * float(np.dot(diff.ravel(), diff.ravel()))


def quadratic_loss(targets, outputs, all_weights, lam: float) -> float:
    """Nonnegative quadratic loss: ½Σ(t − out)² + λ·½·Σ(|w| + w²)."""
    return quadratic_data_loss(targets, outputs) + 0.5 * elastic_net_penalty_total(all_weights, lam)


def _as_arrays(weights) -> list[np.ndarray]:
    if isinstance(weights, np.ndarray):
        return [weights.astype(np.float64, copy=False).ravel()]
    arrays = list(weights)
    if arrays and all(np.isscalar(item) for item in arrays):
        return [np.asarray(arrays, dtype=np.float64)]
    return [np.asarray(item, dtype=np.float64).ravel() for item in arrays]
