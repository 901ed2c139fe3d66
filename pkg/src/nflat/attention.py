"""Shared attention machinery: sinusoidal span encodings, masking, head
bookkeeping, and the instrumentation meter used by the cost benchmark."""
from __future__ import annotations

import numpy as np

from .tensor import Tensor, softmax_lastdim

MASK_FILL = -1e15


def sinusoidal_encoding(span: int, d_model: int) -> np.ndarray:
    """Fixed encoding of a signed integer span.

    Even dims hold sin(span / 10000^(2k/d_model)), odd dims the matching
    cosine.  Parameter-free, so sign and magnitude of the span survive into
    the encoding (sin is odd, cos is even).
    """
    if d_model % 2 != 0:
        raise ValueError(f"d_model must be even, got {d_model}")
    k2 = np.arange(0, d_model, 2, dtype=np.float64)
    angle = span / np.power(10000.0, k2 / d_model)
    out = np.empty(d_model, dtype=np.float64)
    out[0::2] = np.sin(angle)
    out[1::2] = np.cos(angle)
    return out


def sinusoid_table(max_span: int, d_model: int) -> np.ndarray:
    """Encodings for every span in [-max_span, max_span]; row i holds span i - max_span."""
    if d_model % 2 != 0:
        raise ValueError(f"d_model must be even, got {d_model}")
    spans = np.arange(-max_span, max_span + 1, dtype=np.float64)[:, None]
    k2 = np.arange(0, d_model, 2, dtype=np.float64)[None, :]
    angle = spans / np.power(10000.0, k2 / d_model)
    out = np.empty((2 * max_span + 1, d_model), dtype=np.float64)
    out[:, 0::2] = np.sin(angle)
    out[:, 1::2] = np.cos(angle)
    return out


class AttentionMeter:
    """Counts attention score/weight cells and bytes for cost comparisons.

    ``cells`` accumulates score-matrix entries (heads x rows x cols per
    attention application).  ``current_bytes``/``peak_bytes`` track the
    score and weight tensors only, the quantities that separate the flat
    and non-flat lattice constructions.
    """

    def __init__(self):
        self.cells = 0
        self.current_bytes = 0
        self.peak_bytes = 0

    def record_scores(self, heads: int, rows: int, cols: int, itemsize: int) -> None:
        n_cells = heads * rows * cols
        self.cells += n_cells
        # score tensor + softmax weight tensor both live during the forward
        self.current_bytes += 2 * n_cells * itemsize
        self.peak_bytes = max(self.peak_bytes, self.current_bytes)

    def release(self) -> None:
        """Mark the end of one forward pass; live attention tensors are freed."""
        self.current_bytes = 0

    def reset(self) -> None:
        self.cells = 0
        self.current_bytes = 0
        self.peak_bytes = 0


def split_heads(x: Tensor, heads: int) -> Tensor:
    """(B, s, d) -> (B, heads, s, d/heads)."""
    b, s, d = x.shape
    if d % heads != 0:
        raise ValueError(f"d_model {d} not divisible by {heads} heads")
    return x.reshape(b, s, heads, d // heads).transpose(0, 2, 1, 3)


def merge_heads(x: Tensor) -> Tensor:
    """(B, heads, s, hd) -> (B, s, heads*hd)."""
    b, h, s, hd = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, s, h * hd)


def masked_softmax(scores: Tensor, mask: np.ndarray) -> Tensor:
    """Softmax over the last axis after filling invalid positions with -1e15.

    ``mask`` is boolean, True marking valid positions, broadcastable to the
    score shape.  The additive fill drives invalid weights below 1e-6 after
    normalization; rows must keep at least one valid column.
    """
    mask = np.asarray(mask, dtype=bool)
    fill = np.where(mask, 0.0, MASK_FILL).astype(scores.dtype)
    return softmax_lastdim(scores + Tensor(fill))


def init_matrix(rng: np.random.Generator, rows: int, cols: int) -> Tensor:
    """Glorot-uniform weight matrix."""
    bound = np.sqrt(6.0 / (rows + cols))
    return Tensor(rng.uniform(-bound, bound, size=(rows, cols)), requires_grad=True)


def init_vector(rng: np.random.Generator, *shape: int, scale: float = 0.0) -> Tensor:
    if scale == 0.0:
        return Tensor(np.zeros(shape), requires_grad=True)
    return Tensor(rng.uniform(-scale, scale, size=shape), requires_grad=True)


class FeedForward:
    """Two fully connected layers with a ReLU between them."""

    def __init__(self, d_model: int, d_ff: int, rng: np.random.Generator):
        self.w1 = init_matrix(rng, d_model, d_ff)
        self.b1 = init_vector(rng, d_ff)
        self.w2 = init_matrix(rng, d_ff, d_model)
        self.b2 = init_vector(rng, d_model)

    def __call__(self, x: Tensor, drop_rate: float = 0.0,
                 rng: np.random.Generator | None = None, training: bool = False) -> Tensor:
        from .tensor import dropout, relu

        h = relu(x @ self.w1 + self.b1)
        h = dropout(h, drop_rate, rng=rng, training=training)
        h = h @ self.w2 + self.b2
        return dropout(h, drop_rate, rng=rng, training=training)

    def parameters(self, prefix: str) -> dict[str, Tensor]:
        return {
            f"{prefix}.w1": self.w1,
            f"{prefix}.b1": self.b1,
            f"{prefix}.w2": self.w2,
            f"{prefix}.b2": self.b2,
        }


class LayerNormParams:
    def __init__(self, d_model: int):
        self.gain = Tensor(np.ones(d_model), requires_grad=True)
        self.bias = Tensor(np.zeros(d_model), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        from .tensor import layer_norm

        return layer_norm(x, self.gain, self.bias)

    def parameters(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.gain": self.gain, f"{prefix}.bias": self.bias}
