"""Dense tensors with reverse-mode automatic differentiation.

A small numpy-backed engine: each operation records a backward closure,
``Tensor.backward()`` walks the graph in reverse topological order and
accumulates gradients into every reachable tensor with ``requires_grad``.
Shapes follow the batch x sequence x feature convention, row-major.
Float64 is the default dtype; float32 is accepted for faster runs.
"""
from __future__ import annotations

import contextlib

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class LookupError_(IndexError):
    """Raised when an embedding id falls outside the table."""


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (forward-only execution)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """N-d array plus an optional gradient buffer of the same shape."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float64, np.float32):
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._backward = None
        self._prev: tuple[Tensor, ...] = ()

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def backward(self) -> None:
        """Backpropagate from a single-element tensor through the graph."""
        if self.data.size != 1:
            raise ShapeError(f"backward() requires a scalar, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar ------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes if axes else None)

    def swapaxes(self, a: int, b: int):
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return transpose(self, tuple(axes))

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _coerce(x, like: np.ndarray | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    needs = _grad_enabled and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs)
    if needs:
        out._prev = parents
        out._backward = backward
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- arithmetic --------------------------------------------------------


def add(a, b) -> Tensor:
    a = _coerce(a)
    b = _coerce(b, like=a.data)
    out_data = a.data + b.data

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _make(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    a = _coerce(a)
    b = _coerce(b, like=a.data)
    out_data = a.data * b.data

    def backward(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _make(out_data, (a, b), backward)


def div(a, b) -> Tensor:
    a = _coerce(a)
    b = _coerce(b, like=a.data)
    out_data = a.data / b.data

    def backward(g):
        _accum(a, _unbroadcast(g / b.data, a.shape))
        _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _make(out_data, (a, b), backward)


def matmul(a, b) -> Tensor:
    """Matrix product with broadcasting over leading batch dimensions."""
    a = _coerce(a)
    b = _coerce(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} x {b.shape}")
    try:
        out_data = np.matmul(a.data, b.data)
    except ValueError as e:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} x {b.shape}") from e

    def backward(g):
        _accum(a, _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape))
        _accum(b, _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape))

    return _make(out_data, (a, b), backward)


# -- shape manipulation ------------------------------------------------


def reshape(x: Tensor, shape) -> Tensor:
    x = _coerce(x)
    out_data = x.data.reshape(shape)

    def backward(g):
        _accum(x, g.reshape(x.shape))

    return _make(out_data, (x,), backward)


def transpose(x: Tensor, axes=None) -> Tensor:
    x = _coerce(x)
    out_data = np.transpose(x.data, axes)
    if axes is None:
        inv = None
    else:
        inv = tuple(np.argsort(axes))

    def backward(g):
        _accum(x, np.transpose(g, inv))

    return _make(out_data, (x,), backward)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_coerce(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            _accum(t, piece)

    return _make(out_data, tuple(tensors), backward)


def concat_lastdim(a, b) -> Tensor:
    return concat([a, b], axis=-1)


def take(x: Tensor, idx) -> Tensor:
    """Numpy-style indexing with gradient scatter-add on the way back."""
    x = _coerce(x)
    out_data = x.data[idx]

    def backward(g):
        if not x.requires_grad:
            return
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, g)
        _accum(x, gx)

    return _make(out_data, (x,), backward)


def gather_lastdim(x: Tensor, idx: np.ndarray) -> Tensor:
    """out[..., j] = x[..., idx[..., j]] with idx broadcast over leading dims."""
    x = _coerce(x)
    idx = np.asarray(idx)
    full = np.broadcast_to(idx, x.shape[:-1] + idx.shape[-1:])
    out_data = np.take_along_axis(x.data, full, axis=-1)

    def backward(g):
        if not x.requires_grad:
            return
        k = x.shape[-1]
        j = full.shape[-1]
        gx = np.zeros((int(np.prod(x.shape[:-1], dtype=np.int64)), k), dtype=x.dtype)
        rows = np.arange(gx.shape[0])[:, None]
        np.add.at(gx, (rows, full.reshape(-1, j)), g.reshape(-1, j))
        _accum(x, gx.reshape(x.shape))

    return _make(out_data, (x,), backward)


def where(cond: np.ndarray, a, b) -> Tensor:
    """Elementwise select; ``cond`` is a constant boolean array."""
    a = _coerce(a)
    b = _coerce(b, like=a.data)
    cond = np.asarray(cond, dtype=bool)
    out_data = np.where(cond, a.data, b.data)

    def backward(g):
        _accum(a, _unbroadcast(np.where(cond, g, 0.0), a.shape))
        _accum(b, _unbroadcast(np.where(cond, 0.0, g), b.shape))

    return _make(out_data, (a, b), backward)


def astype(x: Tensor, dtype) -> Tensor:
    """Cast to another float dtype; gradients cast back on the way down."""
    x = _coerce(x)
    if x.dtype == dtype:
        return x
    out_data = x.data.astype(dtype)

    def backward(g):
        _accum(x, g.astype(x.dtype))

    return _make(out_data, (x,), backward)


# -- reductions --------------------------------------------------------


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = _coerce(x)
    out_data = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(x, np.broadcast_to(g, x.shape).copy())

    return _make(out_data, (x,), backward)


def tmean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = _coerce(x)
    n = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(tsum(x, axis=axis, keepdims=keepdims), 1.0 / float(n))


def logsumexp(x: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    """log(sum(exp(x))) along one axis, stabilized by max subtraction."""
    x = _coerce(x)
    m = x.data.max(axis=axis, keepdims=True)
    ex = np.exp(x.data - m)
    s = ex.sum(axis=axis, keepdims=True)
    out_data = np.log(s) + m
    soft = ex / s
    if not keepdims:
        out_data = np.squeeze(out_data, axis=axis)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accum(x, g * soft)

    return _make(out_data, (x,), backward)


# -- neural primitives -------------------------------------------------


def relu(x: Tensor) -> Tensor:
    x = _coerce(x)
    out_data = np.maximum(x.data, 0.0)

    def backward(g):
        _accum(x, g * (x.data > 0.0))

    return _make(out_data, (x,), backward)


def softmax_lastdim(x: Tensor) -> Tensor:
    """Softmax over the last axis, stabilized by max subtraction."""
    x = _coerce(x)
    if __debug__ and np.isnan(x.data).any():
        raise FloatingPointError("softmax_lastdim: NaN in input")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    y = ex / ex.sum(axis=-1, keepdims=True)

    def backward(g):
        inner = (g * y).sum(axis=-1, keepdims=True)
        _accum(x, (g - inner) * y)

    return _make(y, (x,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-12) -> Tensor:
    """Normalize each last-dim slice to zero mean, unit variance, then affine."""
    x = _coerce(x)
    gain = _coerce(gain)
    bias = _coerce(bias)
    if gain.shape != x.shape[-1:] or bias.shape != x.shape[-1:]:
        raise ShapeError(
            f"layer_norm: gain/bias {gain.shape}/{bias.shape} must match last dim of {x.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = gain.data * xhat + bias.data

    def backward(g):
        _accum(gain, _unbroadcast(g * xhat, gain.shape))
        _accum(bias, _unbroadcast(g, bias.shape))
        if x.requires_grad:
            dxhat = g * gain.data
            # fused layer-norm gradient
            gx = inv * (
                dxhat
                - dxhat.mean(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
            )
            _accum(x, gx)

    return _make(out_data, (x, gain, bias), backward)


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    """Select rows of ``table`` by integer id; gradients scatter-add back."""
    table = _coerce(table)
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        bad = ids[(ids < 0) | (ids >= table.shape[0])].flat[0]
        raise LookupError_(f"embedding id {bad} outside table with {table.shape[0]} rows")
    out_data = table.data[ids]

    def backward(g):
        if not table.requires_grad:
            return
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        _accum(table, gt)

    return _make(out_data, (table,), backward)


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None = None,
            training: bool = False) -> Tensor:
    """Inverted dropout: kept units are scaled by 1/(1-rate), eval is identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an explicit rng")
    x = _coerce(x)
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    out_data = x.data * keep

    def backward(g):
        _accum(x, g * keep)

    return _make(out_data, (x,), backward)


# -- finite-difference checking ----------------------------------------


def gradcheck(fn, wrt, eps: float = 1e-5, tol: float = 1e-4) -> float:
    """Compare analytic gradients of scalar ``fn()`` against central differences.

    Args:
        fn: no-argument callable returning a scalar Tensor; it must close over
            the tensors in ``wrt``.
        wrt: tensors (requires_grad=True, float64) to differentiate against.
        eps: finite-difference step.
        tol: maximum allowed relative error; exceeded -> AssertionError.

    Returns:
        The worst relative error observed, err = |a-n| / max(1, |a|, |n|).
    """
    wrt = list(wrt)
    for t in wrt:
        if t.data.dtype != np.float64:
            raise ValueError("gradcheck requires float64 tensors")
        t.zero_grad()
    out = fn()
    out.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in wrt]
    worst = 0.0
    for t, ga in zip(wrt, analytic):
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(fn().data)
            flat[i] = orig - eps
            lo = float(fn().data)
            flat[i] = orig
            num = (hi - lo) / (2.0 * eps)
            ana = float(ga.reshape(-1)[i])
            err = abs(ana - num) / max(1.0, abs(ana), abs(num))
            worst = max(worst, err)
            if err > tol:
                raise AssertionError(
                    f"gradient mismatch at element {i} of tensor shape {t.shape}: "
                    f"analytic {ana:.6g} vs numeric {num:.6g} (rel err {err:.3g})"
                )
    return worst
