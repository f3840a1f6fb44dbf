"""Network state and single-example forward/backward propagation.

Weights are stored as one flat float64 array per adjacent layer pair.  Entry
``weights[l][i * n_dst + j]`` connects source unit ``i`` to destination unit
``j``; source index ``i == layer_sizes[l]`` is the bias unit, whose activation
is the constant 1.  Reshaped C-order to ``(n_src + 1, n_dst)`` the bias row is
the last row.

Before any activation runs, a layer's raw sums are divided by the layer size
plus one (the bias).  The input layer is scaled the same way, so raw 0-255
pixels enter the network unnormalized.

Sign convention: a ``WeightDelta`` points uphill on the nonnegative quadratic
loss, so ``apply_delta`` computes ``w - delta`` and moves downhill.

Two update rules share one backward pass.  ``"unscaled"`` (the training rule)
multiplies a unit's error signal into its incoming weights without the (n+1)
division its layer applied on the way forward.  ``"exact"`` keeps that division
and yields ``eta`` times the true gradient.  The two differ in the data term by
the positive per-array factor ``gradient_scale(layer_sizes, layer)``, so both
descend.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ConfigError, DivergenceError, ShapeError
from .mathcore import (
    ActivationKind,
    elu_array,
    elu_deriv_array,
    sgn,
    softmax,
    softmax_deriv,
    softmax_vjp,
)

INIT_WEIGHT_RANGE = 0.1

SoftmaxGradient = Literal["full", "diagonal"]
UpdateRule = Literal["unscaled", "exact"]
UPDATE_RULES = ("unscaled", "exact")


def _frozen_float_array(values) -> np.ndarray:
    array = np.array(values, dtype=np.float64).ravel()
    array.setflags(write=False)
    return array


def weight_count(n_src: int, n_dst: int) -> int:
    return (n_src + 1) * n_dst


def gradient_scale(layer_sizes: Sequence[int], layer: int) -> float:
    """Ratio of the unscaled data-term delta of weight array ``layer`` to the exact one."""
    return float(math.prod(size + 1 for size in layer_sizes[layer + 1 :]))


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class Connectome:
    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    elu_alpha: float

    def __post_init__(self) -> None:
        sizes = tuple(int(size) for size in self.layer_sizes)
        _check_layer_sizes(sizes)
        if not self.elu_alpha > 0:
            raise ShapeError(f"elu_alpha must be > 0, got {self.elu_alpha}")
        if len(self.weights) != len(sizes) - 1:
            raise ShapeError(f"expected {len(sizes) - 1} weight arrays, got {len(self.weights)}")
        arrays = tuple(_frozen_float_array(w) for w in self.weights)
        for layer, array in enumerate(arrays):
            expected = weight_count(sizes[layer], sizes[layer + 1])
            if array.size != expected:
                raise ShapeError(f"weight array {layer} has length {array.size}, expected {expected}")
            if not np.all(np.isfinite(array)):
                raise DivergenceError(f"weight array {layer} contains non-finite values")
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "weights", arrays)
        object.__setattr__(self, "elu_alpha", float(self.elu_alpha))

    @property
    def activations(self) -> tuple[ActivationKind, ...]:
        hidden = (ActivationKind.ELU,) * (len(self.layer_sizes) - 2)
        return (ActivationKind.IDENTITY, *hidden, ActivationKind.SOFTMAX)

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    @property
    def parameter_count(self) -> int:
        return sum(array.size for array in self.weights)

    def matrix(self, layer: int) -> np.ndarray:
        """Read-only ``(n_src + 1, n_dst)`` view of one weight array."""
        return self.weights[layer].reshape(self.layer_sizes[layer] + 1, self.layer_sizes[layer + 1])

    def with_weights(self, weights: Sequence[np.ndarray]) -> Connectome:
        return Connectome(self.layer_sizes, tuple(weights), self.elu_alpha)

    def same_weights(self, other: Connectome) -> bool:
        """Bit-level equality of topology, alpha and every weight."""
        return (
            self.layer_sizes == other.layer_sizes
            and self.elu_alpha == other.elu_alpha
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
        )


@dataclass(frozen=True, eq=False)
class LayerTrace:
    pre_activations: tuple[np.ndarray, ...]
    activated: tuple[np.ndarray, ...]

    @property
    def outputs(self) -> np.ndarray:
        return self.activated[-1]


@dataclass(frozen=True, eq=False)
class WeightDelta:
    values: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        arrays = tuple(_frozen_float_array(v) for v in self.values)
        for layer, array in enumerate(arrays):
            if not np.all(np.isfinite(array)):
                raise DivergenceError(f"delta array {layer} contains non-finite values")
        object.__setattr__(self, "values", arrays)

    @classmethod
    def zeros_like(cls, connectome: Connectome) -> WeightDelta:
        return cls(tuple(np.zeros_like(w) for w in connectome.weights))

    @property
    def shapes(self) -> tuple[int, ...]:
        return tuple(v.size for v in self.values)

    def __neg__(self) -> WeightDelta:
        return WeightDelta(tuple(-v for v in self.values))

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(v))) for v in self.values if v.size), default=0.0)

    def is_zero(self) -> bool:
        return all(not np.any(v) for v in self.values)


def _check_layer_sizes(sizes: Sequence[int]) -> None:
    if len(sizes) < 2:
        raise ShapeError(f"a connectome needs at least 2 layers, got {len(sizes)}")
    for size in sizes:
        if size < 1:
            raise ShapeError(f"layer sizes must be >= 1, got {list(sizes)}")


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------
def init_connectome(layer_sizes: Sequence[int], elu_alpha: float, seed: int) -> Connectome:
    """Draw every weight from U[-0.1, 0.1] with a generator seeded by ``seed``."""
    sizes = tuple(int(size) for size in layer_sizes)
    _check_layer_sizes(sizes)
    if seed < 0:
        raise ShapeError(f"seed must be a nonnegative 64-bit integer, got {seed}")
    rng = np.random.default_rng(seed)
    weights = tuple(
        rng.uniform(-INIT_WEIGHT_RANGE, INIT_WEIGHT_RANGE, size=weight_count(n_src, n_dst))
        for n_src, n_dst in zip(sizes[:-1], sizes[1:])
    )
    return Connectome(sizes, weights, elu_alpha)


# ---------------------------------------------------------------------------
# array kernels (shared by the public operations and the trainer's workers)
# ---------------------------------------------------------------------------
def forward_arrays(
    layer_sizes: Sequence[int],
    weights: Sequence[np.ndarray],
    elu_alpha: float,
    inputs: np.ndarray,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Propagate one input vector, or a stack of row vectors, through the layers."""
    last = len(layer_sizes) - 1
    pre = inputs / (layer_sizes[0] + 1)
    pres = [pre]
    acts = [pre]
    for layer in range(1, last + 1):
        matrix = weights[layer - 1].reshape(layer_sizes[layer - 1] + 1, layer_sizes[layer])
        raw = acts[-1] @ matrix[:-1] + matrix[-1]
        pre = raw / (layer_sizes[layer] + 1)
        act = softmax(pre) if layer == last else elu_array(elu_alpha, pre)
        pres.append(pre)
        acts.append(act)
    return pres, acts


def backward_arrays(
    layer_sizes: Sequence[int],
    weights: Sequence[np.ndarray],
    elu_alpha: float,
    pres: Sequence[np.ndarray],
    acts: Sequence[np.ndarray],
    targets: np.ndarray,
    eta: float,
    lam: float,
    softmax_gradient: SoftmaxGradient = "full",
    update_rule: UpdateRule = "unscaled",
) -> list[np.ndarray]:
    """Return one flat delta array per weight array."""
    exact = update_rule == "exact"
    last = len(layer_sizes) - 1
    outputs = acts[last]
    upstream = outputs - targets
    if softmax_gradient == "diagonal":
        grad_pre = softmax_deriv(outputs) * upstream
    else:
        grad_pre = softmax_vjp(outputs, upstream)

    deltas: list[np.ndarray] = [np.empty(0)] * last
    for layer in range(last, 0, -1):
        unit_delta = grad_pre / (layer_sizes[layer] + 1) if exact else grad_pre
        source = np.append(acts[layer - 1], 1.0)
        w = weights[layer - 1]
        step = np.outer(source, unit_delta).ravel()
        if lam:
            step = step + lam * (np.sign(w) + w)
        deltas[layer - 1] = eta * step
        if layer > 1:
            # original (pre-update) weights, bias row excluded
            matrix = w.reshape(layer_sizes[layer - 1] + 1, layer_sizes[layer])
            grad_pre = (matrix[:-1] @ unit_delta) * elu_deriv_array(elu_alpha, pres[layer - 1])
    return deltas


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------
def _input_vector(c: Connectome, values) -> np.ndarray:
    vector = np.asarray(values, dtype=np.float64)
    if vector.shape != (c.input_size,):
        raise ShapeError(f"input has shape {vector.shape}, expected ({c.input_size},)")
    return vector


def forward(c: Connectome, input_values) -> LayerTrace:
    pres, acts = forward_arrays(c.layer_sizes, c.weights, c.elu_alpha, _input_vector(c, input_values))
    return LayerTrace(tuple(pres), tuple(acts))


def output_error(targets, activated_outputs) -> np.ndarray:
    t = np.asarray(targets, dtype=np.float64)
    out = np.asarray(activated_outputs, dtype=np.float64)
    if t.shape != out.shape:
        raise ShapeError(f"targets have shape {t.shape}, outputs have shape {out.shape}")
    return t - out


def connection_delta(eta: float, unit_delta: float, source_activation: float, weight: float, lam: float) -> float:
    """Update for a single connection: eta * (delta * phi + lambda * (sgn(w) + w))."""
    return eta * (unit_delta * source_activation + lam * (sgn(weight) + weight))


def backward(
    c: Connectome,
    trace: LayerTrace,
    targets,
    eta: float,
    lam: float,
    softmax_gradient: SoftmaxGradient = "full",
    update_rule: UpdateRule = "unscaled",
) -> WeightDelta:
    if update_rule not in UPDATE_RULES:
        raise ConfigError(f"update_rule must be unscaled or exact, got '{update_rule}'")
    if len(trace.activated) != len(c.layer_sizes) or len(trace.pre_activations) != len(c.layer_sizes):
        raise ShapeError("trace does not match the connectome's layer count")
    for layer, size in enumerate(c.layer_sizes):
        if trace.activated[layer].shape != (size,) or trace.pre_activations[layer].shape != (size,):
            raise ShapeError(f"trace layer {layer} does not have length {size}")
    t = np.asarray(targets, dtype=np.float64)
    if t.shape != (c.output_size,):
        raise ShapeError(f"targets have shape {t.shape}, expected ({c.output_size},)")
    deltas = backward_arrays(
        c.layer_sizes,
        c.weights,
        c.elu_alpha,
        trace.pre_activations,
        trace.activated,
        t,
        eta,
        lam,
        softmax_gradient,
        update_rule,
    )
    return WeightDelta(tuple(deltas))


def apply_delta(c: Connectome, d: WeightDelta) -> Connectome:
    if d.shapes != tuple(w.size for w in c.weights):
        raise ShapeError(f"delta shapes {d.shapes} do not match connectome {tuple(w.size for w in c.weights)}")
    with np.errstate(over="ignore", invalid="ignore"):
        updated = tuple(w - delta for w, delta in zip(c.weights, d.values))
    if not all(np.all(np.isfinite(w)) for w in updated):
        raise DivergenceError("weights diverged")
    return c.with_weights(updated)


def sgd_step(
    c: Connectome,
    input_values,
    targets,
    eta: float,
    lam: float,
    softmax_gradient: SoftmaxGradient = "full",
    update_rule: UpdateRule = "unscaled",
) -> tuple[Connectome, WeightDelta]:
    """One forward/backward/apply cycle on a single example."""
    delta = backward(c, forward(c, input_values), targets, eta, lam, softmax_gradient, update_rule)
    return apply_delta(c, delta), delta


def predict_batch(c: Connectome, inputs) -> np.ndarray:
    """Argmax class for every row of ``inputs``; ties resolve to the lowest index."""
    matrix = np.asarray(inputs, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != c.input_size:
        raise ShapeError(f"inputs have shape {matrix.shape}, expected (n, {c.input_size})")
    _, acts = forward_arrays(c.layer_sizes, c.weights, c.elu_alpha, matrix)
    return np.argmax(acts[-1], axis=1)


def predict(c: Connectome, input_values) -> int:
    return int(predict_batch(c, _input_vector(c, input_values)[np.newaxis, :])[0])
