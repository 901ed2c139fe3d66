#!/usr/bin/env python3
"""Tour of the tensor engine: forward ops, backward pass, gradient checking."""

import numpy as np

from nflat import tensor as T
from nflat.tensor import Tensor, gradcheck

rng = np.random.default_rng(0)

# Tensors wrap numpy arrays; requires_grad opts them into the graph.
w = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
x = Tensor(rng.normal(size=(2, 4)))

y = T.softmax_lastdim(x @ w)
print("softmax rows sum to:", y.data.sum(axis=-1))

# backward() from a scalar populates .grad on every reachable parameter
loss = (y * rng.normal(size=(2, 3))).sum()
loss.backward()
print("dL/dw shape:", w.grad.shape, " |dL/dw| max:", abs(w.grad).max().round(4))

# layer norm maps constant rows to the bias
ln = T.layer_norm(Tensor([[5.0, 5.0, 5.0]]), Tensor(np.ones(3)), Tensor(np.zeros(3)))
print("layer_norm of a constant row:", ln.data)

# every differentiable op is validated against central finite differences
w.zero_grad()
err = gradcheck(lambda: (x @ w).sum(), [w])
print(f"matmul finite-difference check: worst rel err {err:.2e}")

# no_grad() skips graph construction for cheap inference
with T.no_grad():
    z = x @ w
print("under no_grad, result requires_grad =", z.requires_grad)
