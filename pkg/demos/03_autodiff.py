# coding: utf-8

# # A small reverse-mode autodiff
#
# The flow models are written on a minimal tensor type. Here we check a
# gradient by hand and run one attention layer.

# In[1]:

import numpy as np

from seaflow import tensorcore as tc

x = tc.parameter(np.array([[1.0, 2.0, 3.0]]))
loss = tc.tsum(tc.log_softmax_row(x) * np.array([[0.0, 0.0, 1.0]]))
loss.backward()
print("analytic", x.grad)
print("expected", np.array([[0, 0, 1.0]]) - np.exp(x.data) / np.exp(x.data).sum())


# Self-attention has no positional encoding, so shuffling the input rows
# shuffles the output rows the same way.

# In[2]:

rng = np.random.default_rng(0)
p = {}
for name in ("q", "k", "v", "o"):
    p["W" + name], p["b" + name] = tc.init_linear(rng, 8, 8)
Z = rng.normal(size=(5, 8))
perm = rng.permutation(5)
out = tc.multi_head_attention(Z, p, heads=2).data
out_perm = tc.multi_head_attention(Z[perm], p, heads=2).data
print("equivariant:", np.allclose(out[perm], out_perm))
