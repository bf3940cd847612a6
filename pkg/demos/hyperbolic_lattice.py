"""Lattice points of the punctured-torus group and their growth rate."""

import numpy as np

from covergap.hyperbolic import SurfaceModel, lattice_point_set, word_length_bound_check

model = SurfaceModel.punctured_torus()
print("generator displacements:", model.generator_displacements())

Ts = [2.0, 3.0, 4.0, 5.0]
sizes = []
for T in Ts:
    lps = lattice_point_set(model, T, 0.9, C_geo=0.0)
    sizes.append(len(lps))
    rep = word_length_bound_check(lps)
    print(f"T={T}: |S(T)| = {len(lps):6d}, longest word {rep['max_word_length']}")
print(f"fitted growth exponent {np.polyfit(Ts, np.log(sizes), 1)[0]:.3f} (area growth predicts 2)")
