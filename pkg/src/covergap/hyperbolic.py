"""Fuchsian model, hyperbolic distance and lattice-point sets.

Points of the upper half-plane are complex numbers with positive imaginary
part. Group elements are 2 x 2 real matrices of determinant 1 acting by
Moebius transformations; signs are irrelevant.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .free_group import BudgetExceededError, Word, ball, inv, reduce_word


class DomainError(ValueError):
    """A point is not in the upper half-plane."""


def _check_upper(z) -> None:
    if np.any(np.imag(z) <= 0):
        raise DomainError("points must have positive imaginary part")


def cosh_distance(z, w):
    """cosh of the hyperbolic distance, ``1 + |z - w|^2 / (2 Im z Im w)``."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    _check_upper(z)
    _check_upper(w)
    return 1.0 + np.abs(z - w) ** 2 / (2.0 * z.imag * w.imag)


def hyp_distance(z, w):
    """Hyperbolic distance in the upper half-plane (broadcasts)."""
    c = cosh_distance(z, w)
    out = np.arccosh(np.maximum(c, 1.0))
    return float(out) if np.ndim(out) == 0 else out


def moebius(g: np.ndarray, z):
    """Action ``(a z + b) / (c z + d)``; ``g`` may be a stack of matrices."""
    g = np.asarray(g, dtype=float)
    z = np.asarray(z, dtype=complex)
    return (g[..., 0, 0] * z + g[..., 0, 1]) / (g[..., 1, 0] * z + g[..., 1, 1])


def sl2_inverse(g: np.ndarray) -> np.ndarray:
    a, b, c, d = g[..., 0, 0], g[..., 0, 1], g[..., 1, 0], g[..., 1, 1]
    return np.stack([np.stack([d, -b], -1), np.stack([-c, a], -1)], -2)


@dataclass(frozen=True)
class FordDomain:
    """Fundamental domain ``{left <= x <= left + width, |z - j| >= 1 for all integers j}``.

    This is the shape of the standard domain of a finite-index subgroup of
    the modular group made of translates of the modular domain, with a single
    cusp of the given width at infinity.
    """

    left: float
    width: float

    def floor(self, x):
        """Lowest admissible height above ``x``."""
        x = np.asarray(x, dtype=float)
        frac = x - np.round(x)
        return np.sqrt(np.clip(1.0 - frac**2, 0.0, None))

    def contains(self, z, tol: float = 1e-12):
        z = np.asarray(z, dtype=complex)
        x, y = z.real, z.imag
        return (x >= self.left - tol) & (x <= self.left + self.width + tol) & (y >= self.floor(x) - tol)

    def area(self) -> float:
        """Hyperbolic area ``int dx dy / y^2`` (equals pi/3 per unit of width)."""
        return math.pi / 3.0 * self.width


@dataclass
class SurfaceModel:
    """A free Fuchsian group with chosen generators and a base point.

    Attributes
    ----------
    name : str
    generators : list of ndarray
        The matrices of g_1, ..., g_d.
    base_point : complex
    geometric_constant : float
        The constant C in displacement cutoffs and cusp heights.
    domain : FordDomain or None
        Fundamental domain, when known.
    """

    name: str
    generators: list
    base_point: complex = 1j
    geometric_constant: float = 1.0
    domain: FordDomain | None = None
    _inv: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        gens = [np.asarray(g, dtype=float) for g in self.generators]
        for g in gens:
            if g.shape != (2, 2) or abs(np.linalg.det(g) - 1.0) > 1e-12:
                raise ValueError("generators must be 2x2 with determinant 1")
        _check_upper(self.base_point)
        self.generators = gens
        self._inv = [sl2_inverse(g) for g in gens]

    @property
    def d(self) -> int:
        return len(self.generators)

    def letter_matrix(self, a: int) -> np.ndarray:
        return self.generators[a - 1] if a > 0 else self._inv[-a - 1]

    def generator_displacements(self) -> np.ndarray:
        w = self.base_point
        return np.array([hyp_distance(moebius(g, w), w) for g in self.generators])

    def commutator(self) -> np.ndarray:
        return word_to_moebius(self, (1, 2, -1, -2))

    def check_freeness(self, max_length: int = 8, tol: float = 1e-6) -> bool:
        """No nonempty reduced word up to ``max_length`` equals +-Id."""
        words = [w for w in ball(self.d, max_length, budget=10**7).sorted() if w]
        mats = np.array([word_to_moebius(self, w) for w in words])
        eye = np.eye(2)
        dev = np.minimum(
            np.abs(mats - eye).max(axis=(1, 2)), np.abs(mats + eye).max(axis=(1, 2))
        )
        return bool(dev.min() > tol)

    @classmethod
    def punctured_torus(cls) -> "SurfaceModel":
        """Commutator subgroup of the modular group: a once-punctured torus.

        Generators ``[[1,1],[1,2]]`` and ``[[1,-1],[-1,2]]``; the cusp at
        infinity has width 6 and the surface has area 2 pi.
        """
        return cls(
            "punctured_torus",
            [np.array([[1.0, 1.0], [1.0, 2.0]]), np.array([[1.0, -1.0], [-1.0, 2.0]])],
            1j,
            1.0,
            FordDomain(-0.5, 6.0),
        )

    def to_json(self) -> str:
        data = {
            "name": self.name,
            "generators": [g.tolist() for g in self.generators],
            "base_point": [self.base_point.real, self.base_point.imag],
            "geometric_constant": self.geometric_constant,
        }
        if self.domain is not None:
            data["domain"] = {"left": self.domain.left, "width": self.domain.width}
        return json.dumps(data, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SurfaceModel":
        data = json.loads(text)
        bp = data.get("base_point", [0.0, 1.0])
        dom = data.get("domain")
        return cls(
            data.get("name", "custom"),
            [np.array(g, dtype=float) for g in data["generators"]],
            complex(bp[0], bp[1]),
            float(data.get("geometric_constant", 1.0)),
            FordDomain(float(dom["left"]), float(dom["width"])) if dom else None,
        )


def word_to_moebius(model: SurfaceModel, w: Word) -> np.ndarray:
    """Matrix of the word, multiplied left to right."""
    w = reduce_word(w, model.d)
    out = np.eye(2)
    for a in w:
        out = out @ model.letter_matrix(a)
    return out


def cusp_region_height(kappa: float, C: float = 1.0) -> float:
    """Height ``C / kappa`` above which the cusp cutoff is active."""
    if not 0 < kappa:
        raise ValueError("kappa must be positive")
    return C / kappa


def diam_K_bound(kappa: float, C: float = 1.0) -> float:
    """Diameter bound ``C + log(1/kappa)`` for the truncated surface."""
    if not 0 < kappa:
        raise ValueError("kappa must be positive")
    return C + math.log(1.0 / kappa)


@dataclass
class LatticePointSet:
    """Group elements moving the base point by at most ``radius_bound``.

    Attributes
    ----------
    T, kappa : float
    radius_bound : float
        ``2 (C + log(1/kappa) + T)``.
    words : list of tuple
        Sorted by displacement, then shortlex.
    displacements : ndarray
    explored : int
        Number of words visited by the search.
    """

    T: float
    kappa: float
    radius_bound: float
    words: list
    displacements: np.ndarray
    explored: int = 0

    def __len__(self) -> int:
        return len(self.words)

    def as_set(self) -> frozenset:
        return frozenset(self.words)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["word", "word_length", "displacement"])
        for w, dist in zip(self.words, self.displacements):
            wr.writerow([json.dumps(list(w)), len(w), f"{dist:.12g}"])
        return buf.getvalue()


def lattice_point_set(
    model: SurfaceModel,
    T: float,
    kappa: float,
    C_geo: float | None = None,
    prune_slack: float | None = None,
    budget: int = 5 * 10**6,
) -> LatticePointSet:
    """All reduced words whose displacement is within ``2(C + log(1/kappa) + T)``.

    The search extends words letter by letter and drops a word once its
    displacement exceeds the cutoff plus ``prune_slack`` (default twice the
    largest generator displacement).

    Raises
    ------
    BudgetExceededError
        When more than ``budget`` words are visited.
    """
    if T <= 0 or not 0 < kappa < 1 + 1e-15:
        raise ValueError("need T > 0 and 0 < kappa <= 1")
    C = model.geometric_constant if C_geo is None else C_geo
    bound = 2.0 * (C + math.log(1.0 / kappa) + T)
    slack = 2.0 * float(model.generator_displacements().max()) if prune_slack is None else prune_slack
    cut = math.cosh(bound + slack)
    acc = math.cosh(bound)
    w0 = complex(model.base_point)
    d = model.d
    letters = np.array(list(range(1, d + 1)) + [-k for k in range(1, d + 1)])
    lmats = np.array([model.letter_matrix(int(a)) for a in letters])

    # per layer: parent index into previous layer, letter code
    parents = [np.array([-1])]
    codes = [np.array([-1])]
    accepted = [(0, 0, 1.0)]  # (layer, index, cosh displacement)
    mats = np.eye(2)[None]
    last = np.array([-1])
    explored = 1
    layer = 0
    while mats.shape[0]:
        layer += 1
        cand_par, cand_code = [], []
        for c in range(2 * d):
            ok = (last != (c + d) % (2 * d)) | (last < 0)
            cand_par.append(np.nonzero(ok)[0])
            cand_code.append(np.full(int(ok.sum()), c))
        par = np.concatenate(cand_par)
        code = np.concatenate(cand_code)
        new = mats[par] @ lmats[code]
        z = moebius(new, w0)
        ch = cosh_distance(z, w0)
        keep = ch <= cut
        par, code, new, ch = par[keep], code[keep], new[keep], ch[keep]
        explored += par.size
        if explored > budget:
            raise BudgetExceededError(f"lattice search visited more than {budget} words")
        parents.append(par)
        codes.append(code)
        hit = np.nonzero(ch <= acc)[0]
        accepted.extend(zip([layer] * hit.size, hit.tolist(), ch[hit].tolist()))
        mats, last = new, code

    def word(layer_k: int, i: int) -> Word:
        out = []
        while layer_k > 0:
            out.append(int(letters[codes[layer_k][i]]))
            i = int(parents[layer_k][i])
            layer_k -= 1
        return tuple(reversed(out))

    items = [(word(k, i), math.acosh(max(c, 1.0))) for k, i, c in accepted]
    items.sort(key=lambda t: (round(t[1], 12), len(t[0]), t[0]))
    return LatticePointSet(
        T,
        kappa,
        bound,
        [w for w, _ in items],
        np.array([x for _, x in items]),
        explored,
    )


def word_length_bound_check(lps: LatticePointSet) -> dict:
    """Maximal word length against the two candidate envelopes.

    Reports the constants ``max_wl / (kappa^2 e^{2T})`` and
    ``max_wl kappa^2 / e^{2T}`` and whether ``max_wl <= |S(T)|``.
    """
    max_wl = max((len(w) for w in lps.words), default=0)
    e2t = math.exp(2 * lps.T)
    return {
        "max_word_length": max_wl,
        "size": len(lps),
        "constant_kappa_squared": max_wl / (lps.kappa**2 * e2t),
        "constant_inverse_kappa_squared": max_wl * lps.kappa**2 / e2t,
        "bounded_by_count": max_wl <= len(lps),
    }
