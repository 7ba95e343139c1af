"""
The style graph and mean smoothing
==================================

Every style image of a mini-batch is one node. Edges are Gram products of
the flattened encoder features; P = D^-1/2 A D^-1/2 spreads each node's
channel means to similar neighbours. Two stacked layers start at identity
weights, where training begins.
"""

import numpy as np

from grin import GraphStack, GrinConfig, adain, build_adjacency, compute_stats, grin, smooth_means
from grin.data import generate_batch
from grin.net import encoder_forward
from grin.tensor import Rng

rng = Rng(7)
content, style, clusters = generate_batch(rng, 4, 32, clusters=[0, 0, 1, 1])
x = encoder_forward(content).deepest
y = encoder_forward(style).deepest
print("clusters:", clusters, "feature shape:", y.shape)

###############################################################################
# Propagation weights are larger inside a cluster than across.
adj = build_adjacency(y)
np.set_printoptions(precision=3, suppress=True)
print(adj.propagation)

###############################################################################
# Smoothing pulls the style means of similar images together. The spread
# between the two members of each cluster shrinks.
mu = compute_stats(y).mean
smoothed = smooth_means(mu, adj, GraphStack.identity(y.shape[1]))
for name, m in (("raw", mu), ("smoothed", smoothed)):
    gap = np.abs(m[0] - m[1]).mean() + np.abs(m[2] - m[3]).mean()
    print(f"{name:9s} within-cluster mean gap {gap:.4f}")

###############################################################################
# In train mode GrIN swaps the bias for the smoothed means; in infer mode it
# is AdaIN, bit for bit.
stack = GraphStack.identity(y.shape[1])
train_out = grin(x, y, GrinConfig(mode="train", stack=stack))
infer_out = grin(x, y, GrinConfig(mode="infer"))
print("infer == adain:", np.array_equal(infer_out, adain(x, y)))
print("train - infer is a per-channel constant:",
      np.ptp(train_out - infer_out, axis=(2, 3)).max() < 1e-9)
