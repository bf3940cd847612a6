"""Random unitary twists, random covers and the zero-mean subspace."""

import numpy as np

from covergap import representations as reps

u = reps.sample("unitary", 6, 2, seed=1)
U = u.unitaries[0]
print("unitarity defect:", np.abs(U.conj().T @ U - np.eye(6)).max())

p = reps.sample("permutation", 100, 2, seed=1)
print("transitive cover:", reps.is_transitive(p))

# the trivial eigenvalue sits on constants; the zero-mean restriction removes it
A = sum(reps.evaluate(p, (g,)) + reps.evaluate(p, (-g,)) for g in (1, 2))
full = np.sort(np.linalg.eigvalsh(A))[::-1]
P = reps.zero_mean_projector(100)
new = np.sort(np.linalg.eigvalsh(P @ A @ P))[::-1]
print(f"top eigenvalue {full[0]:.4f}; top new eigenvalue {new[0]:.4f}; 2 sqrt 3 = {2 * np.sqrt(3):.4f}")
