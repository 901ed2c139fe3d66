"""Self-attention context encoder over the fused character representations.

Single layer, unscaled scores, and a relative-position term built from the
signed character offset i - j, so the encoder sees both direction and
distance.  Structure mirrors the inter-attention layer: attention sublayer
and feed-forward sublayer, each wrapped in residual + layer normalization.
"""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .attention import (
    AttentionMeter,
    FeedForward,
    LayerNormParams,
    init_matrix,
    init_vector,
    masked_softmax,
    merge_heads,
    split_heads,
)
from .interformer import _cached_table
from .tensor import Tensor


class SelfAttnParams:
    """Learnable state for the single self-attention layer."""

    def __init__(self, d_model: int, heads: int, d_ff: int, rng: np.random.Generator):
        if d_model % heads != 0:
            raise ValueError(f"d_model {d_model} not divisible by {heads} heads")
        self.d_model = d_model
        self.heads = heads
        self.head_dim = d_model // heads
        self.w_q = init_matrix(rng, d_model, d_model)
        self.w_k = init_matrix(rng, d_model, d_model)
        self.w_v = init_matrix(rng, d_model, d_model)
        self.w_r = init_matrix(rng, d_model, d_model)
        self.u = init_vector(rng, heads, self.head_dim)
        self.v = init_vector(rng, heads, self.head_dim)
        self.ffn = FeedForward(d_model, d_ff, rng)
        self.ln1 = LayerNormParams(d_model)
        self.ln2 = LayerNormParams(d_model)

    def parameters(self, prefix: str = "self") -> dict[str, Tensor]:
        out = {
            f"{prefix}.w_q": self.w_q,
            f"{prefix}.w_k": self.w_k,
            f"{prefix}.w_v": self.w_v,
            f"{prefix}.w_r": self.w_r,
            f"{prefix}.u": self.u,
            f"{prefix}.v": self.v,
        }
        out.update(self.ffn.parameters(f"{prefix}.ffn"))
        out.update(self.ln1.parameters(f"{prefix}.ln1"))
        out.update(self.ln2.parameters(f"{prefix}.ln2"))
        return out


def signed_offset_encodings(n: int, w_r: Tensor, heads: int) -> Tensor:
    """Projected sinusoid encodings for every signed offset in [-(n-1), n-1].

    Returns:
        Tensor (heads, 2n-1, head_dim); row o holds offset o - (n - 1).
    """
    d_model = w_r.shape[0]
    table = _cached_table(n - 1 if n > 1 else 1, d_model)
    if n == 1:
        table = table[1:2]  # only offset 0
    projected = Tensor(table.astype(w_r.dtype, copy=False)) @ w_r  # (2n-1, d)
    spans = projected.shape[0]
    hd = d_model // heads
    return projected.reshape(spans, heads, hd).transpose(1, 0, 2)


def self_attention_forward(
    h: Tensor,
    params: SelfAttnParams,
    pad_mask: np.ndarray | None = None,
    attn_dropout: float = 0.0,
    fc_dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    training: bool = False,
    meter: AttentionMeter | None = None,
) -> Tensor:
    """Encode context with one layer of unscaled relative-position self-attention.

    Args:
        h: (n, d) or (B, n, d) fused character representations.
        pad_mask: boolean (B, n) marking real characters; padded keys are
            filled with -1e15 before the softmax.
        meter: optional AttentionMeter; records heads*n*n score cells.

    Returns:
        Same shape as ``h``.
    """
    squeeze = h.ndim == 2
    if squeeze:
        h = h.reshape(1, *h.shape)
    b, n, d = h.shape
    if n < 1:
        raise ValueError("empty sentence")
    if pad_mask is None:
        pad_mask = np.ones((b, n), dtype=bool)
    pad_mask = np.atleast_2d(pad_mask)

    heads, hd = params.heads, params.head_dim
    q = split_heads(h @ params.w_q, heads)
    k = split_heads(h @ params.w_k, heads)
    v = split_heads(h @ params.w_v, heads)

    content = (q + params.u.reshape(heads, 1, hd)) @ k.swapaxes(-1, -2)  # (B,l,n,n)

    r_table = signed_offset_encodings(n, params.w_r, heads)  # (l, 2n-1, hd)
    qv = q + params.v.reshape(heads, 1, hd)
    by_offset = qv @ r_table.swapaxes(-1, -2)  # (B, l, n, 2n-1)
    i = np.arange(n)
    offset_idx = i[:, None] - i[None, :] + (n - 1)  # (n, n), entry i-j shifted
    position = T.gather_lastdim(by_offset, offset_idx)
    scores = content + position

    if meter is not None:
        meter.record_scores(heads, b * n, n, scores.dtype.itemsize)
    key_mask = pad_mask[:, None, None, :]
    weights = masked_softmax(scores, key_mask)
    weights = T.dropout(weights, attn_dropout, rng=rng, training=training)
    att = merge_heads(weights @ v)

    out = params.ln1(h + att)
    out = params.ln2(out + params.ffn(out, fc_dropout, rng=rng, training=training))
    if squeeze:
        out = out.reshape(n, d)
    return out
