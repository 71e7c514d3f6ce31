"""Minimal dense-tensor math with reverse-mode autodiff and an SGD optimizer.

Everything is float64 and CPU-only. A Tensor wraps a numpy array plus an
optional gradient; ops build a tape of backward closures that `backward()`
replays in reverse topological order. Gradients accumulate additively until
`zero_grads` (or an optimizer step) clears them, so several losses can be
backpropagated before a single parameter update.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

_GELU_C = math.sqrt(2.0 / math.pi)


class ShapeMismatchError(ValueError):
    pass


class NonFiniteGradientError(RuntimeError):
    pass


class Tensor:
    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if self.data.size != 1:
            raise ShapeMismatchError(
                f"backward() needs a scalar, got shape {self.data.shape}"
            )
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)


def _result(data, parents, backward_fn):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatchError(
            f"matmul shapes incompatible: {a.data.shape} x {b.data.shape}"
        )

    def bw(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return _result(a.data @ b.data, (a, b), bw)


def add(a: Tensor, b: Tensor) -> Tensor:
    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _result(a.data + b.data, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _result(a.data * b.data, (a, b), bw)


def scale(a: Tensor, c) -> Tensor:
    """Multiply by a constant scalar or ndarray (no gradient through c)."""
    c = np.asarray(c, dtype=np.float64)

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * c, a.data.shape))

    return _result(a.data * c, (a,), bw)


def gelu(a: Tensor) -> Tensor:
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def bw(g):
        if a.requires_grad:
            d_inner = _GELU_C * (1.0 + 3 * 0.044715 * x**2)
            a._accumulate(g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * d_inner))

    return _result(out, (a,), bw)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        if a.requires_grad:
            a._accumulate(y * (g - (g * y).sum(axis=axis, keepdims=True)))

    return _result(y, (a,), bw)


def cross_entropy(probs: Tensor, gold_index: int) -> Tensor:
    """-log(probs[gold_index]) on a 1-D distribution, input clamped at 1e-12."""
    if probs.data.ndim != 1:
        raise ShapeMismatchError(f"cross_entropy expects 1-D probs, got {probs.shape}")
    if not 0 <= gold_index < probs.data.shape[0]:
        raise IndexError(
            f"gold index {gold_index} out of range for {probs.data.shape[0]} classes"
        )
    p = max(float(probs.data[gold_index]), 1e-12)

    def bw(g):
        if probs.requires_grad:
            dp = np.zeros_like(probs.data)
            dp[gold_index] = -float(g) / p
            probs._accumulate(dp)

    return _result(-math.log(p), (probs,), bw)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    d = x.data.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc**2).mean(axis=-1, keepdims=True)
    istd = 1.0 / np.sqrt(var + eps)
    xhat = xc * istd
    out = gain.data * xhat + bias.data

    def bw(g):
        if gain.requires_grad:
            gain._accumulate((g * xhat).reshape(-1, d).sum(axis=0))
        if bias.requires_grad:
            bias._accumulate(g.reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            dxhat = g * gain.data
            dx = istd * (
                dxhat
                - dxhat.mean(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
            )
            x._accumulate(dx)

    return _result(out, (x, gain, bias), bw)


def embedding(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise IndexError(
            f"embedding id out of bounds for table with {table.data.shape[0]} rows"
        )

    def bw(g):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, ids, g)

    return _result(table.data[ids], (table,), bw)


def concat(tensors, axis: int = 1) -> Tensor:
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(g[tuple(idx)])

    return _result(np.concatenate([t.data for t in tensors], axis=axis), tensors, bw)


def transpose(a: Tensor) -> Tensor:
    def bw(g):
        if a.requires_grad:
            a._accumulate(g.T)

    return _result(a.data.T, (a,), bw)


def reshape(a: Tensor, shape) -> Tensor:
    orig = a.data.shape

    def bw(g):
        if a.requires_grad:
            a._accumulate(g.reshape(orig))

    return _result(a.data.reshape(shape), (a,), bw)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    def bw(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[start:stop] = g
            a._accumulate(full)

    return _result(a.data[start:stop], (a,), bw)


def mean_of(tensors) -> Tensor:
    """Mean of a list of scalar tensors."""
    total = tensors[0]
    for t in tensors[1:]:
        total = add(total, t)
    return scale(total, 1.0 / len(tensors))


@dataclass
class SgdConfig:
    learning_rate: float
    decay_factor: float = 1.0
    decay_every: int = 1

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.decay_factor <= 1:
            raise ValueError("decay_factor must be in (0, 1]")
        if self.decay_every <= 0:
            raise ValueError("decay_every must be a positive integer")

    def effective_lr(self, step_count: int) -> float:
        return self.learning_rate * self.decay_factor ** (step_count // self.decay_every)


def sgd_step(params: dict, config: SgdConfig, step_count: int) -> None:
    """One SGD update: p -= lr(step) * p.grad for every parameter, then zero grads.

    Parameters with no accumulated gradient are left untouched.
    """
    lr = config.effective_lr(step_count)
    for name, p in params.items():
        if p.grad is None:
            continue
        if not np.all(np.isfinite(p.grad)):
            raise NonFiniteGradientError(f"non-finite gradient in parameter {name!r}")
        p.data -= lr * p.grad
        p.grad = None


def zero_grads(params: dict) -> None:
    for p in params.values():
        p.grad = None


def save_checkpoint(params: dict, path) -> None:
    blob = {
        name: {"shape": list(p.data.shape), "data": p.data.ravel().tolist()}
        for name, p in params.items()
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(blob, f)


def load_checkpoint(path) -> dict:
    with open(path, encoding="utf-8") as f:
        blob = json.load(f)
    params = {}
    for name, rec in blob.items():
        arr = np.asarray(rec["data"], dtype=np.float64).reshape(rec["shape"])
        params[name] = Tensor(arr, requires_grad=True, name=name)
    return params
