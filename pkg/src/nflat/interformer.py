"""Inter-attention fusion of a character sequence with a matched-word sequence.

Characters provide the queries; words provide keys and values.  Scores mix a
content term with a relative-position term built from the head and tail
offsets between each character and each word, so the score matrix is
n x m' per head and word representations never enter the output sequence.
Scores carry no 1/sqrt(d) scaling.
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
    sinusoid_table,
    split_heads,
)
from .tensor import Tensor

ABLATIONS = ("none", "-RPE", "-TAG")

_table_cache: dict[tuple[int, int], np.ndarray] = {}


class DegenerateRowError(ValueError):
    """A real character row has no valid attention target (all words masked)."""


def _cached_table(max_span: int, d_model: int) -> np.ndarray:
    key = (max_span, d_model)
    tab = _table_cache.get(key)
    if tab is None:
        tab = sinusoid_table(max_span, d_model)
        _table_cache[key] = tab
    return tab


class InterFormerParams:
    """Learnable state for one inter-attention layer plus its feed-forward."""

    def __init__(self, d_model: int, heads: int, d_ff: int, rng: np.random.Generator):
        if d_model % heads != 0:
            raise ValueError(f"d_model {d_model} not divisible by {heads} heads")
        self.d_model = d_model
        self.heads = heads
        self.head_dim = d_model // heads
        self.w_q = init_matrix(rng, d_model, d_model)
        self.w_k = init_matrix(rng, d_model, d_model)
        self.w_v = init_matrix(rng, d_model, d_model)
        self.w_r = init_matrix(rng, d_model, 2 * d_model)
        self.u = init_vector(rng, heads, self.head_dim)
        self.v = init_vector(rng, heads, self.head_dim)
        self.ffn = FeedForward(d_model, d_ff, rng)
        self.ln1 = LayerNormParams(d_model)
        self.ln2 = LayerNormParams(d_model)

    def parameters(self, prefix: str = "inter") -> dict[str, Tensor]:
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


def rel_pos_encoding(head_offset: int, tail_offset: int, w_r: Tensor) -> Tensor:
    """ReLU(W_r (p_head ++ p_tail)) for one character-word pair -> (d_model,)."""
    d_model = w_r.shape[0]
    p = np.concatenate(
        [sinusoidal_span(head_offset, d_model), sinusoidal_span(tail_offset, d_model)]
    )
    return T.relu((w_r @ Tensor(p).reshape(2 * d_model, 1)).reshape(d_model))


def sinusoidal_span(span: int, d_model: int) -> np.ndarray:
    from .attention import sinusoidal_encoding

    return sinusoidal_encoding(span, d_model)


def pair_offset_encodings(word_heads: np.ndarray, word_tails: np.ndarray, n: int,
                          w_r: Tensor, heads: int) -> Tensor:
    """Per-head relative encodings R for every (character, word) pair.

    Characters sit at positions 1..n (head == tail == i), so the offsets for
    pair (i, j) are i - head_j and i - tail_j.  Both offsets index one shared
    sinusoid table, and the two halves of ``w_r`` are applied to the table
    once each so only small (span, d) products hit the weight matrix.

    Returns:
        Tensor of shape (B, heads, n, m', head_dim).
    """
    d_model = w_r.shape[0]
    b, m = word_heads.shape
    positions = np.arange(1, n + 1, dtype=np.int64)
    off_head = positions[None, :, None] - word_heads[:, None, :]
    off_tail = positions[None, :, None] - word_tails[:, None, :]
    max_span = int(
        max(n, np.abs(off_head).max(initial=1), np.abs(off_tail).max(initial=1))
    )
    table = _cached_table(max_span, d_model)
    table_t = Tensor(table.astype(w_r.dtype, copy=False))
    half_head = w_r[:, :d_model]
    half_tail = w_r[:, d_model:]
    u_head = table_t @ half_head.swapaxes(0, 1)  # (spans, d)
    u_tail = table_t @ half_tail.swapaxes(0, 1)
    head_idx = off_head + max_span
    tail_idx = off_tail + max_span
    r = T.relu(T.embedding_lookup(u_head, head_idx) + T.embedding_lookup(u_tail, tail_idx))
    hd = d_model // heads
    return r.reshape(b, n, m, heads, hd).transpose(0, 3, 1, 2, 4)


def inter_attention_scores(q: Tensor, k: Tensor, r_per_head: Tensor | None,
                           u: Tensor, v: Tensor) -> Tensor:
    """Unscaled inter-attention scores per head.

    Args:
        q: (heads, n, head_dim) character queries, already split per head.
        k: (heads, m', head_dim) word keys.
        r_per_head: (heads, n, m', head_dim) relative encodings, or None to
            drop the positional term.
        u, v: (heads, head_dim) content/position bias vectors.

    Returns:
        (heads, n, m') scores: (Q_i+u)K_j + (Q_i+v)R_ij, no scaling factor.
    """
    if q.shape[-1] != k.shape[-1]:
        raise T.ShapeError(f"head dims differ: {q.shape} vs {k.shape}")
    heads, n, hd = q.shape
    content = (q + u.reshape(heads, 1, hd)) @ k.swapaxes(-1, -2)
    if r_per_head is None:
        return content
    qv = (q + v.reshape(heads, 1, hd)).reshape(heads, n, 1, hd)
    position = (qv @ r_per_head.swapaxes(-1, -2)).reshape(heads, n, -1)
    return content + position


def interformer_forward(
    x_char: Tensor,
    x_word: Tensor,
    word_heads: np.ndarray,
    word_tails: np.ndarray,
    params: InterFormerParams,
    char_mask: np.ndarray | None = None,
    word_mask: np.ndarray | None = None,
    ablation: str = "none",
    attn_dropout: float = 0.0,
    fc_dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    training: bool = False,
    meter: AttentionMeter | None = None,
    degenerate_fallback: bool = False,
) -> Tensor:
    """Fuse word information into the character stream.

    Args:
        x_char: (n, d) or (B, n, d) character representations.
        x_word: (m', d) or (B, m', d) word representations (auxiliary
            sentence-spanning word included unless ablated upstream).
        word_heads, word_tails: integer arrays (m',) or (B, m'), 1-based
            positions of each word's first/last character.
        char_mask, word_mask: validity masks for padded batches.
        ablation: "none", "-RPE" (drop the relative-position term), or
            "-TAG" (caller omitted the auxiliary word; rows that end up
            with no target raise unless ``degenerate_fallback`` copies the
            input row through unchanged).
        meter: optional AttentionMeter; records heads*n*m' score cells.

    Returns:
        Character representations, same shape as ``x_char``; word rows are
        consumed, never emitted.
    """
    if ablation not in ABLATIONS:
        raise ValueError(f"unknown ablation {ablation!r}, expected one of {ABLATIONS}")
    squeeze = x_char.ndim == 2
    if squeeze:
        x_char = x_char.reshape(1, *x_char.shape)
        x_word = x_word.reshape(1, *x_word.shape)
    word_heads = np.atleast_2d(np.asarray(word_heads, dtype=np.int64))
    word_tails = np.atleast_2d(np.asarray(word_tails, dtype=np.int64))
    b, n, d = x_char.shape
    m = x_word.shape[1]
    if m == 0:
        raise ValueError(
            "word sequence is empty; append the auxiliary word or pad one masked slot"
        )
    if char_mask is None:
        char_mask = np.ones((b, n), dtype=bool)
    if word_mask is None:
        word_mask = np.ones((b, m), dtype=bool)
    char_mask = np.atleast_2d(char_mask)
    word_mask = np.atleast_2d(word_mask)

    row_has_target = word_mask.any(axis=1)  # (B,)
    degenerate = char_mask & ~row_has_target[:, None]
    if degenerate.any() and not degenerate_fallback:
        bad = int(np.argwhere(degenerate)[0][0])
        raise DegenerateRowError(
            f"sentence {bad} has characters with no attention target; "
            "provide the auxiliary word or enable the fallback"
        )

    heads, hd = params.heads, params.head_dim
    q = split_heads(x_char @ params.w_q, heads)  # (B, l, n, hd)
    k = split_heads(x_word @ params.w_k, heads)  # (B, l, m, hd)
    v = split_heads(x_word @ params.w_v, heads)

    content = (q + params.u.reshape(heads, 1, hd)) @ k.swapaxes(-1, -2)
    if ablation == "-RPE":
        scores = content
    else:
        r = pair_offset_encodings(word_heads, word_tails, n, params.w_r, heads)
        qv = (q + params.v.reshape(heads, 1, hd)).reshape(b, heads, n, 1, hd)
        position = (qv @ r.swapaxes(-1, -2)).reshape(b, heads, n, m)
        scores = content + position

    if meter is not None:
        meter.record_scores(heads, b * n, m, scores.dtype.itemsize)
    pair_mask = char_mask[:, None, :, None] & word_mask[:, None, None, :]
    weights = masked_softmax(scores, pair_mask)
    weights = T.dropout(weights, attn_dropout, rng=rng, training=training)
    att = merge_heads(weights @ v)  # (B, n, d)

    h = params.ln1(x_char + att)
    out = params.ln2(h + params.ffn(h, fc_dropout, rng=rng, training=training))

    if degenerate.any():
        out = T.where(degenerate[:, :, None], x_char, out)
    if squeeze:
        out = out.reshape(n, d)
    return out
