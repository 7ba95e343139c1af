"""
Certifying the gradient tape
============================

The decoder and graph weights are trained with a hand-written reverse-mode
tape. Each primitive and the whole objective are compared against central
finite differences.
"""

from grin.gradcheck import check_end_to_end, check_primitives

###############################################################################
# Primitives on small random inputs, every coordinate.
for r in check_primitives(seed=0):
    print(f"{r.name:32s} {r.max_rel_error:.2e}")

###############################################################################
# The full loss (encode, GrIN, decode, re-encode, content + 10 * style) on a
# batch of two 16x16 pairs. Sampled coordinates plus random directions.
for r in check_end_to_end(seed=0):
    print(f"{r.name:32s} {r.max_rel_error:.2e}  ({r.checks} checks)")
