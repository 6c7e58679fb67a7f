"""Minimal reverse-mode automatic differentiation over numpy arrays.

Just enough operator coverage for small fully connected networks and
the clipped-surrogate / value / entropy losses built on them: affine
maps, tanh, exp/log, stable log-softmax, elementwise min and clip,
row gathering, and reductions.  Everything is float64.

Graphs are built eagerly by calling the ops; ``backward(root)``
topologically sorts the tape and accumulates gradients into every
tensor created with ``requires_grad=True``.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "parents", "backward_fn", "requires_grad")

    def __init__(self, data, parents=(), backward_fn=None, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    # operator sugar;  scalars are promoted to constant tensors
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __neg__(self):
        return mul(self, _wrap(-1.0))

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    grad = _unbroadcast(np.asarray(grad, dtype=np.float64), tensor.data.shape)
    if tensor.grad is None:
        tensor.grad = grad
    else:
        tensor.grad = tensor.grad + grad


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, (a, b))
    out.backward_fn = lambda g: (_accumulate(a, g), _accumulate(b, g))
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data, (a, b))
    out.backward_fn = lambda g: (_accumulate(a, g), _accumulate(b, -g))
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, (a, b))
    out.backward_fn = lambda g: (_accumulate(a, g * b.data), _accumulate(b, g * a.data))
    return out


def div(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data / b.data, (a, b))

    def backward_fn(g):
        _accumulate(a, g / b.data)
        _accumulate(b, -g * a.data / (b.data * b.data))

    out.backward_fn = backward_fn
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data @ b.data, (a, b))

    def backward_fn(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    out.backward_fn = backward_fn
    return out


def tanh(a: Tensor) -> Tensor:
    value = np.tanh(a.data)
    out = Tensor(value, (a,))
    out.backward_fn = lambda g: _accumulate(a, g * (1.0 - value * value))
    return out


def exp(a: Tensor) -> Tensor:
    value = np.exp(a.data)
    out = Tensor(value, (a,))
    out.backward_fn = lambda g: _accumulate(a, g * value)
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data), (a,))
    out.backward_fn = lambda g: _accumulate(a, g / a.data)
    return out


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable log-softmax (max subtraction)."""
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    value = shifted - log_z
    out = Tensor(value, (a,))
    probs = np.exp(value)
    out.backward_fn = lambda g: _accumulate(
        a, g - probs * g.sum(axis=axis, keepdims=True)
    )
    return out


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise min; ties route the gradient to the first argument."""
    take_a = a.data <= b.data
    out = Tensor(np.where(take_a, a.data, b.data), (a, b))

    def backward_fn(g):
        _accumulate(a, g * take_a)
        _accumulate(b, g * ~take_a)

    out.backward_fn = backward_fn
    return out


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values to [lo, hi]; gradient is zero outside the interval."""
    inside = (a.data >= lo) & (a.data <= hi)
    out = Tensor(np.clip(a.data, lo, hi), (a,))
    out.backward_fn = lambda g: _accumulate(a, g * inside)
    return out


def gather_rows(a: Tensor, indices: np.ndarray) -> Tensor:
    """Select one column per row: out[i] = a[i, indices[i]]."""
    idx = np.asarray(indices, dtype=np.intp)
    rows = np.arange(a.data.shape[0])
    out = Tensor(a.data[rows, idx], (a,))

    def backward_fn(g):
        full = np.zeros_like(a.data)
        full[rows, idx] = g
        _accumulate(a, full)

    out.backward_fn = backward_fn
    return out


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(a.data.sum(), (a,))
    out.backward_fn = lambda g: _accumulate(a, np.full_like(a.data, float(g)))
    return out


def sum_axis(a: Tensor, axis: int) -> Tensor:
    out = Tensor(a.data.sum(axis=axis), (a,))
    out.backward_fn = lambda g: _accumulate(
        a, np.expand_dims(g, axis) * np.ones_like(a.data)
    )
    return out


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    out = Tensor(a.data.mean(), (a,))
    out.backward_fn = lambda g: _accumulate(a, np.full_like(a.data, float(g) / n))
    return out


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(leaf) into every requires_grad leaf."""
    if root.data.size != 1:
        raise ValueError("backward() expects a scalar root")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    root.grad = np.ones_like(root.data)
    for node in reversed(order):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn(node.grad)
