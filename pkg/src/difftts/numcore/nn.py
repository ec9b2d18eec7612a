"""Neural-net building blocks on top of the autodiff tape.

Layers operate on 2-D tensors laid out as positions x channels (phonemes or
frames along axis 0).  Masks are plain boolean ndarrays, never part of the
graph.
"""

from __future__ import annotations

import numpy as np

from .tensor import ShapeError, Tensor, _node, _wrap


class DegenerateRowError(ValueError):
    """A softmax row with every entry masked."""


class Parameter:
    """Named trainable tensor; gradient lives on the tensor."""

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.tensor = Tensor(value, requires_grad=True)

    @property
    def value(self) -> np.ndarray:
        return self.tensor.data

    @property
    def gradient(self) -> np.ndarray | None:
        return self.tensor.grad

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.tensor.shape})"


class ParamStore:
    """Insertion-ordered registry of parameters, keyed by unique name."""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self._params: dict[str, Parameter] = {}

    def create(self, name: str, value: np.ndarray) -> Parameter:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        p = Parameter(name, np.asarray(value, dtype=self.dtype))
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.tensor.zero_grad()

    def n_entries(self) -> int:
        return sum(p.value.size for p in self._params.values())


class Adam:
    """Adam with bias correction; state is exposed for checkpointing."""

    def __init__(self, store: ParamStore, lr: float = 1e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p.value) for name, p in store.items()}
        self.v = {name: np.zeros_like(p.value) for name, p in store.items()}

    def step(self) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for name, p in self.store.items():
            g = p.tensor.grad
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.tensor.data -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


# -- layer ops ----------------------------------------------------------


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    y = x @ w
    if b is not None:
        y = y + b
    return y


def softmax_rows(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Row-wise softmax with max-subtraction; masked entries are exactly 0."""
    if x.data.ndim != 2:
        raise ShapeError("softmax_rows expects a 2-D tensor")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.shape:
            raise ShapeError("mask shape must match input")
        if (~mask.any(axis=1)).any():
            raise DegenerateRowError("softmax row with all entries masked")
    vals = x.data if mask is None else np.where(mask, x.data, -np.inf)
    shifted = vals - vals.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    if mask is not None:
        e = np.where(mask, e, 0.0)
    out = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        dot = (g * out).sum(axis=1, keepdims=True)
        x._accumulate((g - dot) * out)

    return _node(out.astype(x.data.dtype, copy=False), (x,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each row to zero mean / unit variance, then affine rescale."""
    if x.data.ndim != 2:
        raise ShapeError("layer_norm expects a 2-D tensor")
    n = x.shape[1]
    mu = x.data.mean(axis=1, keepdims=True)
    var = x.data.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = xhat * gain.data + bias.data

    def backward(g):
        dxhat = g * gain.data
        dx = inv * (dxhat - dxhat.mean(axis=1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=1, keepdims=True))
        x._accumulate(dx.astype(x.data.dtype, copy=False))
        gain._accumulate((g * xhat).sum(axis=0).reshape(gain.shape))
        bias._accumulate(g.sum(axis=0).reshape(bias.shape))

    return _node(out.astype(x.data.dtype, copy=False), (x, gain, bias), backward)


def conv1d(x: Tensor, w: Tensor, b: Tensor | None = None, kernel: int = 3) -> Tensor:
    """Same-padded 1-D convolution along rows via an im2col matmul.

    ``x`` is time x C_in, ``w`` is (kernel*C_in) x C_out with taps ordered
    [tap0 | tap1 | ...], each tap a C_in block.
    """
    if x.data.ndim != 2 or w.data.ndim != 2:
        raise ShapeError("conv1d expects 2-D tensors")
    if kernel < 1 or kernel % 2 == 0:
        raise ShapeError("conv1d kernel must be odd and positive")
    t, cin = x.shape
    if w.shape[0] != kernel * cin:
        raise ShapeError(f"weight rows {w.shape[0]} != kernel*C_in {kernel * cin}")
    half = kernel // 2
    padded = np.zeros((t + 2 * half, cin), dtype=x.data.dtype)
    padded[half:half + t] = x.data
    cols = np.concatenate([padded[k:k + t] for k in range(kernel)], axis=1)
    out = cols @ w.data
    if b is not None:
        out = out + b.data

    def backward(g):
        w._accumulate(cols.T @ g)
        if b is not None:
            b._accumulate(g.sum(axis=0).reshape(b.shape))
        dcols = g @ w.data.T
        dpad = np.zeros_like(padded)
        for k in range(kernel):
            dpad[k:k + t] += dcols[:, k * cin:(k + 1) * cin]
        x._accumulate(dpad[half:half + t])

    parents = (x, w) if b is None else (x, w, b)
    return _node(out, parents, backward)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup into an embedding table; gradient scatter-adds."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1:
        raise ShapeError("embedding expects a 1-D id array")
    if ids.min(initial=0) < 0 or (ids.size and ids.max() >= table.shape[0]):
        raise ShapeError("token id outside table range")
    data = table.data[ids]

    def backward(g):
        acc = np.zeros_like(table.data)
        np.add.at(acc, ids, g)
        table._accumulate(acc)

    return _node(data, (table,), backward)


def l2_normalize(x: Tensor) -> Tensor:
    """Scale a vector to unit L2 norm."""
    if x.data.ndim != 1:
        raise ShapeError("l2_normalize expects a 1-D tensor")
    norm = float(np.sqrt((x.data * x.data).sum()))
    if norm == 0.0:
        raise ShapeError("cannot normalize a zero vector")
    y = x.data / norm

    def backward(g):
        x._accumulate((g - y * (y * g).sum()) / norm)

    return _node(y.astype(x.data.dtype, copy=False), (x,), backward)


def apply_mask(x: Tensor, mask: np.ndarray) -> Tensor:
    """Zero rows where mask is False."""
    col = np.asarray(mask, dtype=x.data.dtype).reshape(-1, 1)
    return x * Tensor(col)


def masked_mean(x: Tensor, mask: np.ndarray) -> Tensor:
    """Mean of x over entries whose row mask is True."""
    mask = np.asarray(mask, dtype=bool)
    keep = np.zeros(x.shape, dtype=x.data.dtype)
    keep[mask] = 1.0
    count = float(keep.sum())
    if count == 0:
        raise ShapeError("masked_mean over an empty mask")
    return (x * Tensor(keep)).sum() / count


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor,
                         mask: np.ndarray | None = None) -> tuple[Tensor, Tensor]:
    """Single-head scaled dot-product attention; returns (output, weights)."""
    d = q.shape[1]
    scores = (q @ k.T) * (1.0 / np.sqrt(d))
    full_mask = None
    if mask is not None:
        key_mask = np.asarray(mask, dtype=bool)
        full_mask = np.broadcast_to(key_mask[None, :], (q.shape[0], k.shape[0]))
    weights = softmax_rows(scores, full_mask)
    return weights @ v, weights


def sinusoidal_embedding(t: float, dim: int, dtype=np.float64) -> np.ndarray:
    """Classic sin/cos position features for a scalar diffusion time."""
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half - 1, 1))
    ang = t * freqs * 1000.0
    emb = np.concatenate([np.sin(ang), np.cos(ang)])
    if dim % 2 == 1:
        emb = np.concatenate([emb, np.zeros(1)])
    return emb.astype(dtype).reshape(1, dim)


# -- initializers --------------------------------------------------------


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int,
           shape: tuple[int, ...] | None = None) -> np.ndarray:
    scale = np.sqrt(6.0 / (fan_in + fan_out))
    if shape is None:
        shape = (fan_in, fan_out)
    return rng.uniform(-scale, scale, size=shape)


def normal_init(rng: np.random.Generator, shape: tuple[int, ...], std: float = 0.02) -> np.ndarray:
    return std * rng.standard_normal(shape)
