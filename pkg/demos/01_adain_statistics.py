"""
Instance statistics and AdaIN
=============================

AdaIN whitens each (instance, channel) plane of the content features and
recolors it with the style's per-channel mean and standard deviation.
"""

import numpy as np

from grin import adain, compute_stats
from grin.tensor import Rng

rng = Rng(0)
x = rng.normal((2, 4, 8, 8)) * 3.0 + 1.0    # content features
y = np.abs(rng.normal((2, 4, 8, 8))) * 2.0  # style features (post-ReLU-like)

###############################################################################
# Statistics are N x C matrices; the std already carries the eps guard.
sx, sy = compute_stats(x), compute_stats(y)
print("content means\n", sx.mean.round(3))
print("style stds\n", sy.std.round(3))

###############################################################################
# After AdaIN the output carries the style's means exactly and its stds up
# to the eps guard, which scales by sqrt(var_x / (var_x + eps)).
out = compute_stats(adain(x, y))
print("mean error:", np.abs(out.mean - sy.mean).max())
print("std error: ", np.abs(out.std - sy.std).max())

###############################################################################
# Feeding a tensor as its own style is a round trip.
print("self round trip:", np.abs(adain(x, x) - x).max())
