"""Small fully connected function approximators and their training kit.

Networks are lists of affine layers with tanh hidden activations and a
linear output, held in double precision.  Gradients come from the
reverse-mode tape in :mod:`vecmig.autodiff`; every loss used by the
trainer is checked against central finite differences in the test
suite.  Checkpoints are a flat binary blob of row-major float64 plus a
JSON sidecar describing the shapes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad

LayerTensors = list[tuple[ad.Tensor, ad.Tensor]]
LossEvaluator = Callable[[LayerTensors], ad.Tensor]


@dataclass
class NetworkParams:
    """Weights and biases, one (W, b) pair per affine layer."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def shapes(self) -> list[tuple[int, int]]:
        return [w.shape for w in self.weights]

    def copy(self) -> "NetworkParams":
        return NetworkParams([w.copy() for w in self.weights],
                             [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def to_vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def from_vector(self, vector: np.ndarray) -> "NetworkParams":
        out = self.copy()
        offset = 0
        for a in out.arrays():
            a[...] = vector[offset : offset + a.size].reshape(a.shape)
            offset += a.size
        return out


def init_network(shapes: Sequence[int], seed: int) -> NetworkParams:
    """Deterministic initialization: weights uniform within the
    symmetric fan-balanced bound, biases zero."""
    if len(shapes) < 2:
        raise ValueError("init_network: need at least an input and an output size")
    rng = np.random.Generator(np.random.PCG64(seed))
    weights, biases = [], []
    for fan_in, fan_out in zip(shapes[:-1], shapes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights, biases)


def forward(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    """Plain numpy forward pass; accepts a vector or a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != params.weights[0].shape[0]:
        raise ValueError(
            f"input arity {x.shape[1]} != first layer fan-in "
            f"{params.weights[0].shape[0]}"
        )
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i != last:
            h = np.tanh(h)
    return h[0] if squeeze else h


def as_tensors(params: NetworkParams) -> LayerTensors:
    return [
        (ad.Tensor(w, requires_grad=True), ad.Tensor(b, requires_grad=True))
        for w, b in zip(params.weights, params.biases)
    ]


def forward_tape(layers: LayerTensors, x: np.ndarray) -> ad.Tensor:
    """Tape-tracked forward pass for gradient computation."""
    h = ad.Tensor(np.atleast_2d(np.asarray(x, dtype=np.float64)))
    last = len(layers) - 1
    for i, (w, b) in enumerate(layers):
        h = ad.add(ad.matmul(h, w), b)
        if i != last:
            h = ad.tanh(h)
    return h


def policy_distribution(logits: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis; rows sum to one."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=-1, keepdims=True)


def entropy(probs: np.ndarray) -> float:
    """Shannon entropy in nats with the 0*log(0) = 0 convention."""
    p = np.asarray(probs, dtype=np.float64)
    terms = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return float(-terms.sum(axis=-1).mean()) if p.ndim > 1 else float(-terms.sum())


def gradient(loss_evaluator: LossEvaluator, params: NetworkParams) -> NetworkParams:
    """Reverse-mode gradient of a scalar loss with respect to ``params``.

    ``loss_evaluator`` receives the parameters as tape tensors and must
    return a scalar tensor built from tape operations.
    """
    layers = as_tensors(params)
    loss = loss_evaluator(layers)
    if not np.isfinite(loss.data).all():
        raise FloatingPointError(f"non-finite loss value {loss.data!r}")
    ad.backward(loss)
    weights, biases = [], []
    for w, b in layers:
        weights.append(w.grad if w.grad is not None else np.zeros_like(w.data))
        biases.append(b.grad if b.grad is not None else np.zeros_like(b.data))
    return NetworkParams(weights, biases)


@dataclass(frozen=True)
class FiniteDifferenceReport:
    max_relative_error: float
    max_absolute_error: float
    checked_coordinates: int


def finite_difference_check(
    loss_evaluator: LossEvaluator,
    params: NetworkParams,
    tolerance: float = 1e-4,
    h: float = 1e-5,
) -> FiniteDifferenceReport:
    """Compare every analytic gradient coordinate to central differences.

    Relative error uses a unit floor in the denominator so that tiny
    coordinates are judged on absolute terms.
    """

    def value_at(vector: np.ndarray) -> float:
        candidate = params.from_vector(vector)
        return loss_evaluator(as_tensors(candidate)).item()

    analytic = gradient(loss_evaluator, params).to_vector()
    base = params.to_vector()
    numeric = np.zeros_like(base)
    for i in range(base.size):
        bumped = base.copy()
        bumped[i] = base[i] + h
        up = value_at(bumped)
        bumped[i] = base[i] - h
        down = value_at(bumped)
        numeric[i] = (up - down) / (2.0 * h)
    abs_err = np.abs(analytic - numeric)
    denom = np.maximum(np.abs(numeric), 1.0)
    rel = abs_err / denom
    report = FiniteDifferenceReport(
        max_relative_error=float(rel.max()) if rel.size else 0.0,
        max_absolute_error=float(abs_err.max()) if abs_err.size else 0.0,
        checked_coordinates=int(base.size),
    )
    if report.max_relative_error > tolerance:
        worst = int(np.argmax(rel))
        raise AssertionError(
            f"gradient mismatch at coordinate {worst}: analytic "
            f"{analytic[worst]:.9g} vs central difference {numeric[worst]:.9g} "
            f"(rel err {report.max_relative_error:.3g} > {tolerance:g})"
        )
    return report


@dataclass
class OptimizerState:
    """First/second-moment accumulators for the adaptive mode."""

    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def optimizer_step(
    params: NetworkParams,
    grads: NetworkParams,
    state: OptimizerState | None = None,
    mode: str = "adaptive",
    *,
    learning_rate: float = 1e-4,
    ascend: bool = False,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[NetworkParams, OptimizerState]:
    """One parameter update.

    ``sgd`` applies the plain gradient step (descent by default, ascent
    when maximizing an objective); ``adaptive`` applies a bias-corrected
    first/second-moment rule at the same learning rate.
    """
    if [w.shape for w in params.weights] != [w.shape for w in grads.weights]:
        raise ValueError("gradient shapes do not match parameter shapes")
    if state is None:
        state = OptimizerState()
    sign = 1.0 if ascend else -1.0
    out = params.copy()
    arrays = out.arrays()
    grad_arrays = grads.arrays()
    if mode == "sgd":
        for a, g in zip(arrays, grad_arrays):
            a += sign * learning_rate * g
        return out, state
    if mode != "adaptive":
        raise ValueError(f"unknown optimizer mode {mode!r}")
    if not state.m:
        state.m = [np.zeros_like(a) for a in arrays]
        state.v = [np.zeros_like(a) for a in arrays]
    state.step += 1
    t = state.step
    for a, g, m, v in zip(arrays, grad_arrays, state.m, state.v):
        m[...] = beta1 * m + (1.0 - beta1) * g
        v[...] = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        a += sign * learning_rate * m_hat / (np.sqrt(v_hat) + eps)
    return out, state


def save_params(params: NetworkParams, path: str | Path) -> None:
    """Write ``<path>.bin`` (row-major float64) and ``<path>.json``."""
    path = Path(path)
    blob = b"".join(a.astype(np.float64).tobytes(order="C") for a in params.arrays())
    path.with_suffix(".bin").write_bytes(blob)
    meta = {
        "dtype": "float64",
        "order": "row-major, alternating weight and bias per layer",
        "layers": [
            {"weight": list(w.shape), "bias": list(b.shape)}
            for w, b in zip(params.weights, params.biases)
        ],
    }
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")


def load_params(path: str | Path) -> NetworkParams:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    blob = path.with_suffix(".bin").read_bytes()
    flat = np.frombuffer(blob, dtype=np.float64)
    weights, biases = [], []
    offset = 0
    for layer in meta["layers"]:
        w_shape = tuple(layer["weight"])
        b_shape = tuple(layer["bias"])
        w_size = int(np.prod(w_shape))
        b_size = int(np.prod(b_shape))
        weights.append(flat[offset : offset + w_size].reshape(w_shape).copy())
        offset += w_size
        biases.append(flat[offset : offset + b_size].reshape(b_shape).copy())
        offset += b_size
    return NetworkParams(weights, biases)
