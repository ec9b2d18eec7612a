"""Reverse-mode autodiff over numpy arrays.

A Tensor wraps a float ndarray together with the tape node that produced
it.  Calling ``backward()`` on a scalar result walks the recorded graph in
reverse topological order and accumulates gradients into every tensor that
was created with ``requires_grad=True``.

Only what the synthesis stack needs is implemented: 2-D matmul, elementwise
arithmetic with scalar/row broadcasting, a handful of nonlinearities and
reductions.  This is deliberately not a general array library.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

_FLOAT_DTYPES = (np.float32, np.float64)

# When False, ops do not record tape nodes (inference / sampling).
_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class ShapeError(ValueError):
    """Operand shapes incompatible with the requested op."""


class NumericError(ArithmeticError):
    """NaN or Inf appeared in a tensor."""


def _check_finite(arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericError("non-finite values in tensor")
    return arr


def _coerce(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.dtype not in _FLOAT_DTYPES:
        arr = arr.astype(np.float64)
    return arr


class Tensor:
    """Float array plus autodiff bookkeeping."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _check_finite(_coerce(data))
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    # -- introspection -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}, grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    # -- graph plumbing ------------------------------------------------
    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        """Backpropagate from a scalar result."""
        if self.data.size != 1:
            raise ShapeError("backward() requires a scalar tensor")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
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
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar --------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(_wrap(other, self), -1.0))

    def __rsub__(self, other):
        return add(_wrap(other, self), mul(self, -1.0))

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ShapeError("tensor/tensor division not supported; divide by scalars")
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def sum(self):
        return tsum(self)

    def mean(self):
        return tmean(self)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def tanh(self):
        return tanh(self)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])


def _wrap(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.data.dtype))


def _node(data: np.ndarray, parents: Sequence[Tensor], backward: Callable[[np.ndarray], None]) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a gradient back to the shape it was broadcast from."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _broadcastable(a: tuple[int, ...], b: tuple[int, ...]) -> bool:
    for x, y in zip(reversed(a), reversed(b)):
        if x != y and x != 1 and y != 1:
            return False
    return True


# -- primitive ops -----------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    b = _wrap(b, a)
    if not _broadcastable(a.shape, b.shape):
        raise ShapeError(f"cannot add shapes {a.shape} and {b.shape}")
    data = a.data + b.data

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(g, b.shape))

    return _node(data, (a, b), backward)


def mul(a: Tensor, b) -> Tensor:
    b = _wrap(b, a)
    if not _broadcastable(a.shape, b.shape):
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}")
    data = a.data * b.data

    def backward(g):
        a._accumulate(_unbroadcast(g * b.data, a.shape))
        b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _node(data, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError("matmul expects 2-D tensors")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dims disagree: {a.shape} x {b.shape}")
    data = a.data @ b.data

    def backward(g):
        a._accumulate(g @ b.data.T)
        b._accumulate(a.data.T @ g)

    return _node(data, (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError("transpose expects a 2-D tensor")

    def backward(g):
        a._accumulate(g.T)

    return _node(a.data.T.copy(), (a,), backward)


def reshape(a: Tensor, shape) -> Tensor:
    data = a.data.reshape(shape)

    def backward(g):
        a._accumulate(g.reshape(a.shape))

    return _node(data, (a,), backward)


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def backward(g):
        a._accumulate(g * data)

    return _node(data, (a,), backward)


def log(a: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        data = np.log(a.data)

    def backward(g):
        a._accumulate(g / a.data)

    return _node(data, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    data = np.tanh(a.data)

    def backward(g):
        a._accumulate(g * (1.0 - data * data))

    return _node(data, (a,), backward)


def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0.0)

    def backward(g):
        a._accumulate(g * (a.data > 0.0))

    return _node(data, (a,), backward)


def tsum(a: Tensor) -> Tensor:
    data = np.asarray(a.data.sum(), dtype=a.data.dtype)

    def backward(g):
        a._accumulate(np.broadcast_to(g, a.shape).astype(a.data.dtype, copy=False))

    return _node(data, (a,), backward)


def tmean(a: Tensor) -> Tensor:
    n = a.data.size
    data = np.asarray(a.data.mean(), dtype=a.data.dtype)

    def backward(g):
        a._accumulate(np.broadcast_to(g / n, a.shape).astype(a.data.dtype, copy=False))

    return _node(data, (a,), backward)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ShapeError(f"cannot column-concat shapes {a.shape} and {b.shape}")
    na = a.shape[1]
    data = np.concatenate([a.data, b.data], axis=1)

    def backward(g):
        a._accumulate(g[:, :na])
        b._accumulate(g[:, na:])

    return _node(data, (a, b), backward)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError("slice_rows expects a 2-D tensor")
    data = a.data[start:stop].copy()

    def backward(g):
        full = np.zeros_like(a.data)
        full[start:stop] = g
        a._accumulate(full)

    return _node(data, (a,), backward)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError("slice_cols expects a 2-D tensor")
    data = a.data[:, start:stop].copy()

    def backward(g):
        full = np.zeros_like(a.data)
        full[:, start:stop] = g
        a._accumulate(full)

    return _node(data, (a,), backward)


def repeat_rows(a: Tensor, counts: np.ndarray) -> Tensor:
    """Repeat row p of ``a`` counts[p] times; the length-regulator primitive."""
    if a.data.ndim != 2:
        raise ShapeError("repeat_rows expects a 2-D tensor")
    counts = np.asarray(counts, dtype=np.int64)
    if counts.shape != (a.shape[0],):
        raise ShapeError("one count per row required")
    if np.any(counts < 0) or counts.sum() == 0:
        raise ShapeError("counts must be nonnegative with positive total")
    index = np.repeat(np.arange(a.shape[0]), counts)
    data = a.data[index]

    def backward(g):
        acc = np.zeros_like(a.data)
        np.add.at(acc, index, g)
        a._accumulate(acc)

    return _node(data, (a,), backward)


def avg_pool_rows(a: Tensor) -> Tensor:
    """Average consecutive row pairs; odd tails are padded by edge repetition."""
    if a.data.ndim != 2:
        raise ShapeError("avg_pool_rows expects a 2-D tensor")
    t = a.shape[0]
    out_t = (t + 1) // 2
    padded = a.data if t % 2 == 0 else np.concatenate([a.data, a.data[-1:]], axis=0)
    data = 0.5 * (padded[0::2] + padded[1::2])

    def backward(g):
        acc = np.zeros_like(a.data)
        acc[0::2] += 0.5 * g
        if t % 2 == 0:
            acc[1::2] += 0.5 * g
        else:
            acc[1::2] += 0.5 * g[: t // 2]
            acc[-1] += 0.5 * g[-1]
        a._accumulate(acc)

    return _node(data, (a,), backward)
