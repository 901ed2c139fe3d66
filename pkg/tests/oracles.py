"""Independent reference implementations used as test oracles.

Everything here is deliberately written with scalar loops and plain math so
it shares no code path with the library being checked.
"""

import itertools
import math

import numpy as np


def ref_sinusoid(span, d):
    out = np.zeros(d)
    for k2 in range(0, d, 2):
        angle = span / (10000.0 ** (k2 / d))
        out[k2] = math.sin(angle)
        out[k2 + 1] = math.cos(angle)
    return out


def ref_scores(qh, kh, rh, u, v):
    """Scalar-loop evaluation of (Q_i+u)K_j + (Q_i+v)R_ij per head."""
    heads, n, hd = qh.shape
    m = kh.shape[1]
    a = np.zeros((heads, n, m))
    for s in range(heads):
        for i in range(n):
            for j in range(m):
                t1 = sum((qh[s, i, c] + u[s, c]) * kh[s, j, c] for c in range(hd))
                t2 = 0.0
                if rh is not None:
                    t2 = sum((qh[s, i, c] + v[s, c]) * rh[s, i, j, c] for c in range(hd))
                a[s, i, j] = t1 + t2
    return a


def ref_layer_norm(x, gain, bias, eps=1e-12):
    mu = x.mean()
    var = ((x - mu) ** 2).mean()
    return gain * (x - mu) / math.sqrt(var + eps) + bias


def ref_interformer(x_char, x_word, heads_pos, tails_pos, p):
    """Two-loop reference for the whole fusion layer (no dropout)."""
    n, d = x_char.shape
    m = x_word.shape[0]
    heads, hd = p.heads, p.head_dim
    q = x_char @ p.w_q.data
    k = x_word @ p.w_k.data
    v = x_word @ p.w_v.data

    att = np.zeros((n, d))
    for s in range(heads):
        sl = slice(s * hd, (s + 1) * hd)
        scores = np.zeros((n, m))
        for i in range(n):
            for j in range(m):
                ph = ref_sinusoid((i + 1) - heads_pos[j], d)
                pt = ref_sinusoid((i + 1) - tails_pos[j], d)
                r = np.maximum(p.w_r.data @ np.concatenate([ph, pt]), 0.0)
                scores[i, j] = (q[i, sl] + p.u.data[s]) @ k[j, sl] + (
                    q[i, sl] + p.v.data[s]
                ) @ r[sl]
        for i in range(n):
            w = np.exp(scores[i] - scores[i].max())
            w /= w.sum()
            att[i, sl] = sum(w[j] * v[j, sl] for j in range(m))

    h = np.stack(
        [ref_layer_norm(x_char[i] + att[i], p.ln1.gain.data, p.ln1.bias.data) for i in range(n)]
    )
    ffn = np.maximum(h @ p.ffn.w1.data + p.ffn.b1.data, 0.0) @ p.ffn.w2.data + p.ffn.b2.data
    return np.stack(
        [ref_layer_norm(h[i] + ffn[i], p.ln2.gain.data, p.ln2.bias.data) for i in range(n)]
    )


def crf_brute_force(emissions, trans, start, end):
    """Enumerate all L^n paths; return (logZ, best_score, best_path)."""
    n, n_lab = emissions.shape
    scores = []
    best_score, best_path = -math.inf, None
    for path in itertools.product(range(n_lab), repeat=n):
        s = start[path[0]] + end[path[-1]]
        s += sum(emissions[t, path[t]] for t in range(n))
        s += sum(trans[path[t - 1], path[t]] for t in range(1, n))
        scores.append(s)
        if s > best_score:
            best_score, best_path = s, path
    m = max(scores)
    log_z = m + math.log(sum(math.exp(s - m) for s in scores))
    return log_z, best_score, best_path
