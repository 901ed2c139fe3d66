#!/usr/bin/env python3
"""Linear-chain CRF: exact partition function and Viterbi decoding."""

import itertools
import math

import numpy as np

from nflat.crf import CrfParams, crf_log_likelihood, crf_log_partition, viterbi_decode
from nflat.tensor import Tensor

rng = np.random.default_rng(2)
n, n_labels = 4, 3
params = CrfParams(d_model=8, n_labels=n_labels, rng=rng)
emissions = Tensor(rng.normal(size=(n, n_labels)) * 2.0)

# the forward algorithm agrees with summing all 3^4 = 81 paths explicitly
log_z = crf_log_partition(emissions, params.transitions, params.start, params.end)
scores = []
for path in itertools.product(range(n_labels), repeat=n):
    s = params.start.data[path[0]] + params.end.data[path[-1]]
    s += sum(emissions.data[t, path[t]] for t in range(n))
    s += sum(params.transitions.data[a, b] for a, b in zip(path, path[1:]))
    scores.append(s)
m = max(scores)
brute = m + math.log(sum(math.exp(s - m) for s in scores))
print(f"logZ forward algorithm: {log_z.item():.10f}")
print(f"logZ brute force:       {brute:.10f}")

# probabilities over all paths sum to one
total = sum(
    math.exp(crf_log_likelihood(emissions, np.array(p), params).item())
    for p in itertools.product(range(n_labels), repeat=n)
)
print(f"sum of path probabilities: {total:.10f}")

# Viterbi returns the argmax path; its score matches the brute-force max
best = viterbi_decode(emissions.data, params)
print(f"viterbi path: {best}, brute-force max score {max(scores):.4f}")

# the log-likelihood is differentiable end to end
emissions.requires_grad = True
nll = -crf_log_likelihood(emissions, best, params)
nll.backward()
print(f"d(NLL)/d(emissions) shape: {emissions.grad.shape}")
