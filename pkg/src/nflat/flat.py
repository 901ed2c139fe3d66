"""Flat-lattice baseline: one self-attention pass over characters + words.

Cost-faithful, not fidelity-faithful: matched words are appended to the
character sequence with head/tail span positions and every token attends to
every token, so the score matrix is (n+m)^2 per head.  The same two-offset
relative encoding as the fusion layer is applied symmetrically.  Word rows
are discarded from the output; only character rows are returned.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .attention import AttentionMeter, init_matrix, init_vector, merge_heads
from .interformer import _cached_table
from .lexicon import MatchedWord
from .tensor import Tensor


@dataclass
class FlatLattice:
    """Characters (head == tail == position) followed by matched words."""

    surfaces: list[str]
    heads: np.ndarray
    tails: np.ndarray
    n_chars: int

    def __len__(self) -> int:
        return len(self.surfaces)


def build_flat_lattice(chars: str, matches: list[MatchedWord]) -> FlatLattice:
    """Append matched words (sorted by head, tail) to the character tokens."""
    ordered = sorted(matches, key=lambda m: (m.head, m.tail))
    n = len(chars)
    surfaces = list(chars) + [m.word for m in ordered]
    heads = np.concatenate(
        [np.arange(1, n + 1, dtype=np.int64), [m.head for m in ordered]]
    ).astype(np.int64)
    tails = np.concatenate(
        [np.arange(1, n + 1, dtype=np.int64), [m.tail for m in ordered]]
    ).astype(np.int64)
    return FlatLattice(surfaces, heads, tails, n)


class FlatParams:
    """Projections and relative-position weights for the baseline layer."""

    def __init__(self, d_model: int, heads: int, rng: np.random.Generator):
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


def flat_forward(
    x_tokens: Tensor,
    lattice: FlatLattice,
    params: FlatParams,
    meter: AttentionMeter | None = None,
    row_chunk: int = 128,
) -> Tensor:
    """Self-attention over every token pair; returns the character rows only.

    The relative term works through row chunks so the (N, N, d) pair-encoding
    tensor never materializes at once; the score matrix itself is still the
    full heads x N x N block that makes this construction expensive.
    """
    total, d = x_tokens.shape
    if total != len(lattice):
        raise T.ShapeError(
            f"{total} embedding rows for a lattice of {len(lattice)} tokens"
        )
    heads, hd = params.heads, params.head_dim

    def split(x):
        return x.reshape(total, heads, hd).transpose(1, 0, 2)

    q = split(x_tokens @ params.w_q)  # (l, N, hd)
    k = split(x_tokens @ params.w_k)
    v = split(x_tokens @ params.w_v)

    content = (q + params.u.reshape(heads, 1, hd)) @ k.swapaxes(-1, -2)

    max_span = int(
        max(
            1,
            lattice.heads.max() - lattice.heads.min(),
            lattice.tails.max() - lattice.tails.min(),
        )
    )
    table = _cached_table(max_span, d)
    table_t = Tensor(table.astype(params.w_r.dtype, copy=False))
    u_head = table_t @ params.w_r[:, :d].swapaxes(0, 1)
    u_tail = table_t @ params.w_r[:, d:].swapaxes(0, 1)
    qv = q + params.v.reshape(heads, 1, hd)

    blocks = []
    for start in range(0, total, row_chunk):
        stop = min(start + row_chunk, total)
        h_idx = lattice.heads[start:stop, None] - lattice.heads[None, :] + max_span
        t_idx = lattice.tails[start:stop, None] - lattice.tails[None, :] + max_span
        r = T.relu(T.embedding_lookup(u_head, h_idx) + T.embedding_lookup(u_tail, t_idx))
        r = r.reshape(stop - start, total, heads, hd).transpose(2, 0, 1, 3)
        qv_block = qv[:, start:stop, :].reshape(heads, stop - start, 1, hd)
        blocks.append(
            (qv_block @ r.swapaxes(-1, -2)).reshape(heads, stop - start, total)
        )
    position = T.concat(blocks, axis=1) if len(blocks) > 1 else blocks[0]
    scores = content + position

    if meter is not None:
        meter.record_scores(heads, total, total, scores.dtype.itemsize)
    weights = T.softmax_lastdim(scores)
    out = merge_heads((weights @ v).reshape(1, heads, total, hd))
    return out.reshape(total, d)[: lattice.n_chars]
