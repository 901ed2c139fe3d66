#!/usr/bin/env python3
"""Inter-attention fusion: characters query words, scores stay n x m'."""

import numpy as np

from nflat.attention import AttentionMeter, masked_softmax
from nflat.interformer import (
    InterFormerParams,
    inter_attention_scores,
    interformer_forward,
    pair_offset_encodings,
)
from nflat.attention import split_heads
from nflat.tensor import Tensor

rng = np.random.default_rng(1)
d_model, heads = 16, 4
n, m = 9, 4  # 9 characters, 3 matched words + 1 auxiliary word

params = InterFormerParams(d_model, heads, 2 * d_model, rng)
x_char = Tensor(rng.normal(size=(n, d_model)))
x_word = Tensor(rng.normal(size=(m, d_model)))
word_heads = np.array([1, 4, 7, 1])  # last entry: auxiliary word spanning 1..n
word_tails = np.array([3, 6, 9, 9])

meter = AttentionMeter()
fused = interformer_forward(
    x_char, x_word, word_heads, word_tails, params, meter=meter
)
print(f"fused characters: {fused.shape}  (words are consumed, never emitted)")
print(f"score cells: {meter.cells} = heads*n*m' = {heads}*{n}*{m}")
print(f"a flat lattice would need heads*(n+m)^2 = {heads * (n + m - 1 + 1) ** 2}")

# peek at one head's attention map: each character row sums to 1 over words
q = split_heads((x_char @ params.w_q).reshape(1, n, d_model), heads)
k = split_heads((x_word @ params.w_k).reshape(1, m, d_model), heads)
r = pair_offset_encodings(
    word_heads[None, :], word_tails[None, :], n, params.w_r, heads
)
scores = inter_attention_scores(
    q.reshape(heads, n, -1), k.reshape(heads, m, -1),
    r.reshape(heads, n, m, -1), params.u, params.v,
)
weights = masked_softmax(scores, np.ones((n, m), dtype=bool))
np.set_printoptions(precision=2, suppress=True)
print("\nhead 0 attention (rows = characters, cols = words):")
print(weights.data[0])

# relative-position term reacts to the character/word offsets, so two words
# with the same surface but different spans are distinguishable
same_offsets = r.data[0, :, 2, 0, :]  # char 3 vs word spanning 1..3
print("\nencoding for (char 3, word 1..3):", same_offsets[:4].round(3), "...")
