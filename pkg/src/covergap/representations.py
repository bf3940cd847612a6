"""Random finite-dimensional representations of F_d.

Two flavors are supported: uniformly random permutation matrices (acting on
the zero-mean subspace when compressed) and Haar-random unitaries. All
randomness comes from a counter-based Philox generator so that trials can be
derived from a single seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .free_group import Word, reduce_word

FLAVORS = ("permutation", "unitary")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def trial_seed(seed: int, trial: int) -> int:
    """Seed of an individual trial, derived as ``seed XOR trial``."""
    return int(seed) ^ int(trial)


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed n x n unitary (QR of complex Ginibre with phase fix)."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def permutation_matrix(perm: np.ndarray) -> np.ndarray:
    """Matrix M with ``M e_i = e_{perm[i]}``."""
    n = perm.size
    m = np.zeros((n, n))
    m[perm, np.arange(n)] = 1.0
    return m


@dataclass(eq=False)
class RepresentationSample:
    """Images of the generators under a random representation.

    Attributes
    ----------
    flavor : str
        ``"permutation"`` or ``"unitary"``.
    n : int
        Dimension.
    d : int
        Rank of the free group.
    seed : int
        Seed used to draw the sample.
    permutations : list of ndarray or None
        Index arrays (permutation flavor).
    unitaries : list of ndarray or None
        Unitary matrices (unitary flavor).
    """

    flavor: str
    n: int
    d: int
    seed: int
    permutations: list | None = None
    unitaries: list | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def to_json(self) -> dict:
        out = {"flavor": self.flavor, "n": self.n, "d": self.d, "seed": self.seed}
        if self.flavor == "permutation":
            out["permutations"] = [p.tolist() for p in self.permutations]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "RepresentationSample":
        if obj["flavor"] == "permutation" and "permutations" in obj:
            perms = [np.asarray(p, dtype=np.int64) for p in obj["permutations"]]
            return cls("permutation", int(obj["n"]), int(obj["d"]), int(obj["seed"]), perms)
        # unitary samples are reproduced from the seed
        return sample(obj["flavor"], int(obj["n"]), int(obj["d"]), int(obj["seed"]))


class DimensionError(ValueError):
    """Representation dimension below 2."""


def sample(flavor: str, n: int, d: int, seed: int) -> RepresentationSample:
    """Draw a random representation of F_d of dimension ``n``.

    Parameters
    ----------
    flavor : {"permutation", "unitary"}
    n, d : int
        Dimension (at least 2) and rank (at least 1).
    seed : int
        Seed for the Philox generator.
    """
    if flavor not in FLAVORS:
        raise ValueError(f"unknown flavor {flavor!r}")
    if n < 2:
        raise DimensionError("need n >= 2")
    if d < 1:
        raise ValueError("need d >= 1")
    rng = make_rng(seed)
    if flavor == "permutation":
        perms = [rng.permutation(n) for _ in range(d)]
        return RepresentationSample(flavor, n, d, int(seed), permutations=perms)
    us = [haar_unitary(n, rng) for _ in range(d)]
    return RepresentationSample(flavor, n, d, int(seed), unitaries=us)


def evaluate_permutation(rep: RepresentationSample, w: Word) -> np.ndarray:
    """Index array of the permutation representing ``w``."""
    if rep.flavor != "permutation":
        raise ValueError("not a permutation sample")
    w = reduce_word(w, rep.d)
    p = np.arange(rep.n)
    for a in reversed(w):
        g = rep.permutations[abs(a) - 1]
        if a < 0:
            g = _inverse_perm(rep, abs(a))
        p = g[p]
    return p


def _inverse_perm(rep: RepresentationSample, k: int) -> np.ndarray:
    key = ("inv", k)
    if key not in rep._cache:
        rep._cache[key] = np.argsort(rep.permutations[k - 1])
    return rep._cache[key]


def evaluate(rep: RepresentationSample, w: Word) -> np.ndarray:
    """Dense matrix of rho(w)."""
    w = reduce_word(w, rep.d)
    if rep.flavor == "permutation":
        return permutation_matrix(evaluate_permutation(rep, w))
    out = np.eye(rep.n, dtype=complex)
    for a in w:
        u = rep.unitaries[abs(a) - 1]
        out = out @ (u if a > 0 else u.conj().T)
    return out


def zero_mean_projector(n: int) -> np.ndarray:
    """Orthogonal projector onto vectors with zero coordinate sum."""
    return np.eye(n) - np.full((n, n), 1.0 / n)


def restrict_zero_mean(rep: RepresentationSample, w: Word) -> np.ndarray:
    """Compression P rho(w) P to the zero-mean subspace (as an n x n matrix)."""
    if rep.flavor != "permutation":
        raise ValueError("zero-mean restriction is defined for permutation samples")
    p = zero_mean_projector(rep.n)
    return p @ evaluate(rep, w) @ p


def is_transitive(rep: RepresentationSample) -> bool:
    """Whether the generated permutation group acts transitively."""
    if rep.flavor != "permutation":
        raise ValueError("transitivity is defined for permutation samples")
    n = rep.n
    rows = np.concatenate([np.arange(n)] * rep.d)
    cols = np.concatenate(rep.permutations)
    graph = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    ncomp, _ = connected_components(graph, directed=True, connection="weak")
    return ncomp == 1
