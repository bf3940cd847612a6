"""Free resolvent kernel, the truncated remainder and discretized interior operators."""

import numpy as np

from covergap.hyperbolic import SurfaceModel
from covergap.parametrix import (
    GridSpec,
    build_cutoffs,
    discretize_a_gamma,
    remainder_kernel,
    resolvent_kernel,
    resolvent_s1_closed_form,
    svd_truncate,
)

for r in (0.5, 1.0, 2.0, 4.0):
    print(f"r={r}: R(1; r) = {resolvent_kernel(1.0, r):.10f}, closed form {float(resolvent_s1_closed_form(r)):.10f}")

r = np.linspace(4.5, 6.5, 9)
print("remainder kernel at T=5:", np.round(remainder_kernel(0.8, 5.0, r), 6))

pair = build_cutoffs(0.1)
print(f"cutoff for kappa=0.1: tau_n = {pair.tau_n:.2f}")

model = SurfaceModel.punctured_torus()
ag = discretize_a_gamma(model, (), 0.8, 3.0, 0.5, GridSpec())
tr = svd_truncate(ag, 10)
print(f"a_identity: HS norm {ag.hs_norm:.4f}, rank {tr.rank} for error {tr.error:.2e}")
