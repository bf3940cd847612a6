"""Operator norms of the generator sum: random covers against the regular representation."""

import math

import numpy as np

from covergap import representations as reps
from covergap.operator_lab import CoefficientMap, assemble, regular_norm_lower, spectral_norm

gs = CoefficientMap.generator_sum(2)
print("regular representation, compressed to balls:")
for R in (2, 4, 6, 8, 10):
    print(f"  R={R:2d}  {regular_norm_lower(gs, R):.5f}")
print(f"  limit 2 sqrt 3 = {2 * math.sqrt(3):.5f}")

print("random covers, norm on the zero-mean subspace (median of 10 seeds):")
for n in (50, 200, 800):
    norms = [spectral_norm(assemble(gs, reps.sample("permutation", n, 2, s), zero_mean=True))
             for s in range(10)]
    print(f"  n={n:4d}  {np.median(norms):.5f}")
