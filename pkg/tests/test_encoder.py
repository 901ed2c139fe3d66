"""Context encoder: direction awareness, padding behavior, gradients."""

import numpy as np
import pytest

from nflat.attention import AttentionMeter, masked_softmax
from nflat.encoder import SelfAttnParams, self_attention_forward, signed_offset_encodings
from nflat.tensor import Tensor, gradcheck


def make_params(d_model=8, heads=2, d_ff=16, seed=0):
    return SelfAttnParams(d_model, heads, d_ff, np.random.default_rng(seed))


class TestSelfAttention:
    def test_single_token_attends_to_itself(self):
        rng = np.random.default_rng(1)
        p = make_params()
        h = Tensor(rng.normal(size=(1, 8)))
        out = self_attention_forward(h, p)
        # with one token the attention weight is exactly 1, so the attention
        # output equals the value projection of that token
        v = (h.data @ p.w_v.data).reshape(8)
        mu = lambda x: (x - x.mean()) / np.sqrt(((x - x.mean()) ** 2).mean() + 1e-12)
        h1 = p.ln1.gain.data * mu(h.data.reshape(8) + v) + p.ln1.bias.data
        ffn = np.maximum(h1 @ p.ffn.w1.data + p.ffn.b1.data, 0) @ p.ffn.w2.data + p.ffn.b2.data
        expected = p.ln2.gain.data * mu(h1 + ffn) + p.ln2.bias.data
        assert np.allclose(out.data.reshape(8), expected, atol=1e-10)

    def test_direction_awareness(self):
        """Signed offsets i-j and j-i contribute differently when v' != 0."""
        rng = np.random.default_rng(2)
        p = make_params(seed=3)
        n = 4
        r_table = signed_offset_encodings(n, p.w_r, p.heads)  # (l, 2n-1, hd)
        q_row = rng.normal(size=(p.heads, p.head_dim))
        i, j = 1, 3
        fwd = ((q_row + p.v.data) * r_table.data[:, (i - j) + n - 1, :]).sum()
        bwd = ((q_row + p.v.data) * r_table.data[:, (j - i) + n - 1, :]).sum()
        assert abs(fwd - bwd) > 1e-6

    def test_offset_table_symmetric_when_projection_even(self):
        # sanity for the test above: with w_r zero the two directions agree
        p = make_params(seed=4)
        p.w_r.data[:] = 0.0
        r_table = signed_offset_encodings(3, p.w_r, p.heads)
        assert np.allclose(r_table.data[:, 0, :], r_table.data[:, -1, :])

    def test_padding_invariance(self):
        rng = np.random.default_rng(5)
        p = make_params(seed=6)
        n, d = 5, 8
        h = rng.normal(size=(n, d))
        single = self_attention_forward(Tensor(h), p)
        padded = np.zeros((2, 9, d))
        padded[0, :n] = h
        padded[1] = rng.normal(size=(9, d))
        mask = np.zeros((2, 9), dtype=bool)
        mask[0, :n] = True
        mask[1, :] = True
        batched = self_attention_forward(Tensor(padded), p, pad_mask=mask)
        assert np.abs(batched.data[0, :n] - single.data).max() < 1e-6

    def test_padded_weight_mass_below_threshold(self):
        rng = np.random.default_rng(7)
        scores = Tensor(rng.normal(size=(2, 6)))
        mask = np.array([[True, True, True, False, False, False]] * 2)
        w = masked_softmax(scores, mask)
        assert w.data[:, 3:].max() < 1e-6

    def test_score_matrix_is_square_per_head(self):
        rng = np.random.default_rng(8)
        p = make_params()
        meter = AttentionMeter()
        n = 7
        self_attention_forward(Tensor(rng.normal(size=(n, 8))), p, meter=meter)
        assert meter.cells == p.heads * n * n

    def test_empty_sentence_rejected(self):
        p = make_params()
        with pytest.raises(ValueError):
            self_attention_forward(Tensor(np.zeros((0, 8))), p)

    def test_full_gradient_check(self):
        rng = np.random.default_rng(9)
        p = make_params(d_model=8, heads=2, d_ff=12, seed=10)
        h = Tensor(rng.normal(size=(4, 8)), requires_grad=True)
        w = rng.normal(size=(4, 8))
        wrt = [h] + list(p.parameters().values())

        def loss():
            return (self_attention_forward(h, p) * w).sum()

        gradcheck(loss, wrt, tol=1e-4)

    def test_half_heads_config_shapes(self):
        p = make_params(d_model=8, heads=4)
        assert p.head_dim == 2
        rng = np.random.default_rng(11)
        out = self_attention_forward(Tensor(rng.normal(size=(3, 8))), p)
        assert out.shape == (3, 8)
