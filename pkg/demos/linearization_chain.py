"""One half-step of the linearization, then a full chain down to a linear map."""

import numpy as np

from covergap import representations as reps
from covergap.linearization import build_chain, half_step, random_instance
from covergap.operator_lab import assemble

rng = np.random.default_rng(0)
cm = random_instance(rng, d=2, l=4, s_max=5, m=1)
rep = reps.sample("unitary", 6, 2, seed=3)

hs = half_step(cm, 4)
P = assemble(cm, rep, dense_cap=10**9).to_dense()
Q = assemble(hs.output_map, rep, dense_cap=10**9).to_dense()
lhs = np.linalg.norm(Q, 2) ** 2 - hs.theta
print(f"||Q||^2 - theta = {lhs:.12f}")
print(f"||P||           = {np.linalg.norm(P, 2):.12f}")

ch = build_chain(cm, 4)
print(f"chain of {ch.v} levels, n_k = {ch.n}, final support radius {ch.final_map.support.radius}")
top = np.linalg.norm(assemble(ch.final_map, rep, dense_cap=10**9).to_dense(), 2)
print(f"unwound norm {ch.unwind(top):.10f}")
