"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Only what the sequence model needs: elementwise arithmetic with broadcasting,
matrix products, reductions, row gathers, slicing, concatenation and the
composed softmax / layer-norm / GELU helpers.  Gradients accumulate into
``Tensor.grad`` after calling :func:`backward` on a scalar result.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_bwd")

    def __init__(self, data, _parents=(), _bwd=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self._parents: tuple[Tensor, ...] = _parents
        self._bwd = _bwd

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    # operator sugar -------------------------------------------------
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

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def __neg__(self):
        return neg(self)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _acc(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = g.copy()
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward pass."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# elementwise -------------------------------------------------------
def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, (a, b))

    def bwd():
        _acc(a, _unbroadcast(out.grad, a.data.shape))
        _acc(b, _unbroadcast(out.grad, b.data.shape))

    out._bwd = bwd
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data, (a, b))

    def bwd():
        _acc(a, _unbroadcast(out.grad, a.data.shape))
        _acc(b, _unbroadcast(-out.grad, b.data.shape))

    out._bwd = bwd
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, (a, b))

    def bwd():
        _acc(a, _unbroadcast(out.grad * b.data, a.data.shape))
        _acc(b, _unbroadcast(out.grad * a.data, b.data.shape))

    out._bwd = bwd
    return out


def div(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data / b.data, (a, b))

    def bwd():
        _acc(a, _unbroadcast(out.grad / b.data, a.data.shape))
        _acc(b, _unbroadcast(-out.grad * a.data / (b.data * b.data), b.data.shape))

    out._bwd = bwd
    return out


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data, (a,))

    def bwd():
        _acc(a, -out.grad)

    out._bwd = bwd
    return out


def exp(a: Tensor) -> Tensor:
    out = Tensor(np.exp(a.data), (a,))

    def bwd():
        _acc(a, out.grad * out.data)

    out._bwd = bwd
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data), (a,))

    def bwd():
        _acc(a, out.grad / a.data)

    out._bwd = bwd
    return out


def tanh(a: Tensor) -> Tensor:
    out = Tensor(np.tanh(a.data), (a,))

    def bwd():
        _acc(a, out.grad * (1.0 - out.data * out.data))

    out._bwd = bwd
    return out


def sqrt(a: Tensor) -> Tensor:
    out = Tensor(np.sqrt(a.data), (a,))

    def bwd():
        _acc(a, out.grad * 0.5 / out.data)

    out._bwd = bwd
    return out


def pow_const(a: Tensor, exponent: float) -> Tensor:
    out = Tensor(a.data**exponent, (a,))

    def bwd():
        _acc(a, out.grad * exponent * a.data ** (exponent - 1.0))

    out._bwd = bwd
    return out


# linear algebra ----------------------------------------------------
def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; 3-D operands are treated as matching stacks."""
    out = Tensor(a.data @ b.data, (a, b))

    def bwd():
        _acc(a, out.grad @ b.data.swapaxes(-1, -2))
        _acc(b, a.data.swapaxes(-1, -2) @ out.grad)

    out._bwd = bwd
    return out


def transpose(a: Tensor) -> Tensor:
    out = Tensor(a.data.T, (a,))

    def bwd():
        _acc(a, out.grad.T)

    out._bwd = bwd
    return out


def transpose_axes(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = Tensor(a.data.transpose(axes), (a,))

    def bwd():
        _acc(a, out.grad.transpose(inverse))

    out._bwd = bwd
    return out


# reductions --------------------------------------------------------
def sum_(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims), (a,))

    def bwd():
        g = out.grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _acc(a, np.broadcast_to(g, a.data.shape).copy())

    out._bwd = bwd
    return out


def mean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), Tensor(1.0 / count))


# structure ---------------------------------------------------------
def rows(a: Tensor, idx) -> Tensor:
    """Gather rows (first axis); repeated indices accumulate on backward."""
    idx = np.asarray(idx, dtype=np.intp)
    out = Tensor(a.data[idx], (a,))

    def bwd():
        buf = np.zeros_like(a.data)
        np.add.at(buf, idx, out.grad)
        _acc(a, buf)

    out._bwd = bwd
    return out


def select(a: Tensor, row_idx, col_idx) -> Tensor:
    """Pick scalar entries (row_idx[i], col_idx[i]) from a 2-D tensor."""
    row_idx = np.asarray(row_idx, dtype=np.intp)
    col_idx = np.asarray(col_idx, dtype=np.intp)
    out = Tensor(a.data[row_idx, col_idx], (a,))

    def bwd():
        buf = np.zeros_like(a.data)
        np.add.at(buf, (row_idx, col_idx), out.grad)
        _acc(a, buf)

    out._bwd = bwd
    return out


def row_slice(a: Tensor, start: int, stop: int) -> Tensor:
    out = Tensor(a.data[start:stop].copy(), (a,))

    def bwd():
        buf = np.zeros_like(a.data)
        buf[start:stop] = out.grad
        _acc(a, buf)

    out._bwd = bwd
    return out


def col_slice(a: Tensor, start: int, stop: int) -> Tensor:
    out = Tensor(a.data[:, start:stop].copy(), (a,))

    def bwd():
        buf = np.zeros_like(a.data)
        buf[:, start:stop] = out.grad
        _acc(a, buf)

    out._bwd = bwd
    return out


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]

    def bwd():
        offset = 0
        for t, size in zip(tensors, sizes):
            index = [slice(None)] * out.grad.ndim
            index[axis] = slice(offset, offset + size)
            _acc(t, out.grad[tuple(index)])
            offset += size

    out._bwd = bwd
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape), (a,))

    def bwd():
        _acc(a, out.grad.reshape(a.data.shape))

    out._bwd = bwd
    return out


# fused nonlinearities ----------------------------------------------
def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along ``axis``."""
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(p, (a,))

    def bwd():
        g = out.grad
        _acc(a, p * (g - (g * p).sum(axis=axis, keepdims=True)))

    out._bwd = bwd
    return out


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    lp = shifted - lse
    out = Tensor(lp, (a,))

    def bwd():
        g = out.grad
        _acc(a, g - np.exp(lp) * g.sum(axis=axis, keepdims=True))

    out._bwd = bwd
    return out


def layer_norm(a: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-12) -> Tensor:
    """Row-wise layer normalization with learned scale and shift.

    The epsilon only guards exactly-constant rows; float64 keeps the
    normalization well-conditioned for any nondegenerate input.
    """
    mu = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    sigma = np.sqrt(var + eps)
    xhat = centered / sigma
    out = Tensor(xhat * gamma.data + beta.data, (a, gamma, beta))

    def bwd():
        g = out.grad
        gg = g * gamma.data
        _acc(
            a,
            (
                gg
                - gg.mean(axis=-1, keepdims=True)
                - xhat * (gg * xhat).mean(axis=-1, keepdims=True)
            )
            / sigma,
        )
        axes = tuple(range(g.ndim - 1))
        _acc(gamma, (g * xhat).sum(axis=axes))
        _acc(beta, g.sum(axis=axes))

    out._bwd = bwd
    return out


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a: Tensor) -> Tensor:
    """GELU activation (tanh approximation); smooth, so finite differences agree."""
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    out = Tensor(0.5 * x * (1.0 + t), (a,))

    def bwd():
        sech2 = 1.0 - t * t
        local = 0.5 * (1.0 + t) + 0.5 * x * sech2 * _GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
        _acc(a, out.grad * local)

    out._bwd = bwd
    return out


def backward(result: Tensor) -> None:
    """Reverse-accumulate gradients from a scalar result into all leaves."""
    if result.data.size != 1:
        raise ValueError("backward expects a scalar result tensor")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(result, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    result.grad = np.ones_like(result.data)
    for node in reversed(order):
        if node._bwd is not None and node.grad is not None:
            node._bwd()
