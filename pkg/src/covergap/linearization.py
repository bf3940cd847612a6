"""Half-degree linearization of operators supported on balls of F_d.

One step replaces ``P = sum_{w in S} a_w (x) rho(w)`` (S in B_l, self-adjoint)
by ``Q = sum_{g in S1} b_g (x) rho(g)`` with S1 in B_{l/2} such that

    Q^* Q = e_{0,0} (x) (P + theta Id),   hence   ||Q||^2 = ||P|| + theta

in every unitary representation, provided the spectrum of P is symmetric
(the largest eigenvalue equals the norm). Iterating reduces any support to
B_1. The chain hermitizes before every step, which makes the spectrum
symmetric and accounts for the factor 2 in each level dimension.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import representations as reps
from .free_group import IDENTITY, SupportSet, Word, ball, inv, mul, split_support
from .operator_lab import CoefficientMap, assemble, hermitize, spectral_norm, triangle_upper


class NotHermitianError(ValueError):
    """Input coefficient map is not self-adjoint."""


class SquareRootError(ArithmeticError):
    """A matrix expected to be PSD has a clearly negative eigenvalue."""


class DimensionBudgetError(RuntimeError):
    """The chain would exceed the configured coefficient dimension."""


PSD_TOL = 1e-10


@dataclass
class HalfStep:
    """Result of one half-degree step.

    Attributes
    ----------
    input_map : CoefficientMap
        Self-adjoint map supported in B_l.
    output_map : CoefficientMap
        Coefficients b_g, of size m*|S1|, supported on S1.
    l : int
        Radius bound of the input support.
    s1 : list of tuple
        Ordered index set S1 (symmetric, contains the identity).
    theta : float
        ``|S1| * ||a_tilde||``.
    a_tilde : ndarray
        Block matrix indexed by ``(i, g)`` -> ``i*|S1| + index(g)``.
    b_tilde : ndarray
        PSD square root of ``a_tilde + ||a_tilde|| Id``.
    multiplicity : dict
        ``w -> #{(g, h) in S1 x S1 : g^{-1} h = w}``.
    """

    input_map: CoefficientMap
    output_map: CoefficientMap
    l: int
    s1: list
    theta: float
    a_tilde: np.ndarray
    b_tilde: np.ndarray
    multiplicity: dict

    @property
    def a_tilde_norm(self) -> float:
        return self.theta / len(self.s1)

    @property
    def identity_index(self) -> int:
        return self.s1.index(IDENTITY)

    def multiplicity_table(self) -> dict:
        """Pair ``(g, h)`` -> multiplicity of ``g^{-1} h``."""
        return {(g, h): self.multiplicity[mul(inv(g), h)] for g in self.s1 for h in self.s1}


def _psd_sqrt(x: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(x)
    scale = max(1.0, float(np.abs(vals).max(initial=0.0)))
    if vals.size and vals.min() < -PSD_TOL * scale:
        raise SquareRootError(f"eigenvalue {vals.min():.3e} below tolerance")
    root = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * root) @ vecs.conj().T


def half_step(cm: CoefficientMap, l: int) -> HalfStep:
    """One half-degree linearization step.

    Parameters
    ----------
    cm : CoefficientMap
        Self-adjoint coefficients (``a_{w^{-1}} = a_w^*``) supported in B_l.
    l : int
        Radius bound; odd values are treated as ``l + 1``.

    Returns
    -------
    HalfStep

    Raises
    ------
    NotHermitianError
        If ``cm`` is not self-adjoint.
    SquareRootError
        If ``a_tilde + ||a_tilde|| Id`` has an eigenvalue below -1e-10.
    """
    if not cm.is_hermitian():
        raise NotHermitianError("half_step needs a self-adjoint coefficient map")
    support = cm.support
    if support.radius > l:
        raise ValueError(f"support radius {support.radius} exceeds l = {l}")
    s1 = split_support(support, l).sorted()
    k = len(s1)
    m = cm.m
    mult: dict = {}
    for g in s1:
        for h in s1:
            w = mul(inv(g), h)
            mult[w] = mult.get(w, 0) + 1
    blocks = np.zeros((m, k, m, k), dtype=complex)
    for p, g in enumerate(s1):
        for q, h in enumerate(s1):
            w = mul(inv(g), h)
            if w in cm.entries:
                blocks[:, p, :, q] = cm.entries[w] / mult[w]
    a_tilde = blocks.reshape(m * k, m * k)
    a_tilde = 0.5 * (a_tilde + a_tilde.conj().T)
    norm = float(np.abs(np.linalg.eigvalsh(a_tilde)).max(initial=0.0))
    b_tilde = _psd_sqrt(a_tilde + norm * np.eye(m * k))
    e = s1.index(IDENTITY)
    cols_e = np.arange(m) * k + e
    out = {}
    for p, g in enumerate(s1):
        b = np.zeros((m * k, m * k), dtype=complex)
        b[:, cols_e] = b_tilde[:, np.arange(m) * k + p]
        out[g] = b
    return HalfStep(
        input_map=cm,
        output_map=CoefficientMap(m * k, out, cm.d),
        l=l,
        s1=s1,
        theta=k * norm,
        a_tilde=a_tilde,
        b_tilde=b_tilde,
        multiplicity=mult,
    )


def _assembled_dense(cm: CoefficientMap, rep: reps.RepresentationSample, zero_mean: bool) -> np.ndarray:
    return assemble(cm, rep, zero_mean=zero_mean, dense_cap=10**9).to_dense()


def verify_step(
    hs: HalfStep,
    rep: reps.RepresentationSample,
    zero_mean: bool = False,
    tol: float = 1e-12,
) -> float:
    """Residual ``|(||Q||^2 - theta) - ||P||}`` in the representation ``rep``.

    Both norms are computed with the Lanczos routine. In general
    ``||Q||^2 - theta`` is the largest eigenvalue of P, so the residual
    vanishes for hermitized inputs (whose spectrum is symmetric).
    """
    p = _assembled_dense(hs.input_map, rep, zero_mean)
    q = _assembled_dense(hs.output_map, rep, zero_mean)
    norm_p = spectral_norm(p, tol=tol)
    norm_q = spectral_norm(q, tol=tol)
    return abs(norm_q**2 - hs.theta - norm_p)


def block_structure_defect(
    hs: HalfStep, rep: reps.RepresentationSample, zero_mean: bool = False
) -> tuple[float, float]:
    """Deviation of ``Q^* Q`` from ``e_{0,0} (x) (P + theta Id)``.

    Returns
    -------
    off_block : float
        Largest entry outside the identity block.
    identity_block : float
        Largest entry of ``(Q^* Q)_{0,0} - (P + theta Id)``.
    """
    n = rep.n
    m, k = hs.input_map.m, len(hs.s1)
    q = _assembled_dense(hs.output_map, rep, zero_mean)
    qq = (q.conj().T @ q).reshape(m, k, n, m, k, n)
    e = hs.identity_index
    block = qq[:, e, :, :, e, :].reshape(m * n, m * n)
    rest = qq.copy()
    rest[:, e, :, :, e, :] = 0.0
    p = _assembled_dense(hs.input_map, rep, zero_mean)
    ident = np.kron(np.eye(m), reps.zero_mean_projector(n) if zero_mean else np.eye(n))
    target = p + hs.theta * ident
    return float(np.abs(rest).max(initial=0.0)), float(np.abs(block - target).max(initial=0.0))


@dataclass
class ChainLevel:
    """Bookkeeping for one level of the chain."""

    step: HalfStep
    support_size: int
    s1_size: int
    n_k: int
    coefficient_dim: int
    theta: float
    a_tilde_norm: float

    def to_dict(self) -> dict:
        return {
            "l": self.step.l,
            "support_size": self.support_size,
            "s1_size": self.s1_size,
            "n_k": self.n_k,
            "coefficient_dim": self.coefficient_dim,
            "theta": self.theta,
            "a_tilde_norm": self.a_tilde_norm,
        }


@dataclass
class LinearizationChain:
    """Iterated half-steps down to a map supported in B_1.

    ``n_k`` is the product of the split-set sizes ``|S1|`` (identity
    included) over levels 1..k. Hermitization doubles the matrix size at
    every level; that factor is carried by the matrix size ``m_k = 2^k m``,
    so the coefficients at level k have size ``m * 2^k * n_k``.
    """

    input_map: CoefficientMap
    l: int
    levels: list = field(default_factory=list)

    @property
    def v(self) -> int:
        return len(self.levels)

    @property
    def final_map(self) -> CoefficientMap:
        return self.levels[-1].step.output_map if self.levels else self.input_map

    @property
    def n(self) -> list:
        return [1] + [lv.n_k for lv in self.levels]

    @property
    def thetas(self) -> list:
        return [lv.theta for lv in self.levels]

    def dimension_bound(self) -> float:
        """Closed-form bound ``2 l |S|^v l^(v-1)`` for ``n_v``."""
        return chain_dimension_bound(self.l, len(self.input_map.support))

    def identity_adjustment(self) -> float:
        """Product of ``(|S1|)/(|S1| - 1)`` over levels: the cost of adding the identity."""
        out = 1.0
        for lv in self.levels:
            out *= lv.s1_size / max(lv.s1_size - 1, 1)
        return out

    def unwind(self, final_norm: float) -> float:
        """Norm of the original operator from the norm of the final one.

        Applies ``||A_{k-1}|| = ||A_k||^2 - theta_k`` from the top level down.
        """
        x = final_norm
        for lv in reversed(self.levels):
            x = x * x - lv.theta
        return x

    def to_json(self) -> str:
        return json.dumps(
            {
                "l": self.l,
                "v": self.v,
                "m": self.input_map.m,
                "support_size": len(self.input_map.support),
                "n": self.n,
                "dimension_bound": self.dimension_bound(),
                "identity_adjustment": self.identity_adjustment(),
                "levels": [lv.to_dict() for lv in self.levels],
            },
            sort_keys=True,
        )


def chain_dimension_bound(l: int, s_size: int) -> float:
    v = math.ceil(math.log2(l)) if l > 1 else 0
    return 2 * l * s_size**v * l ** (v - 1)


def build_chain(cm: CoefficientMap, l: int, max_dim: int = 20000) -> LinearizationChain:
    """Iterate hermitize + half_step until the support lies in B_1.

    Parameters
    ----------
    cm : CoefficientMap
        Coefficients supported in B_l.
    l : int
        Initial radius bound, at least 2.
    max_dim : int
        Cap on the coefficient dimension of any level.

    Raises
    ------
    DimensionBudgetError
        Names the level at which the cap is exceeded.
    """
    if l < 2:
        raise ValueError("need l >= 2")
    if cm.support.radius > l:
        raise ValueError("support exceeds B_l")
    chain = LinearizationChain(cm, l)
    cur, cur_l, n_k = cm, l, 1
    while cur_l > 1:
        h = hermitize(cur)
        k1 = len(split_support(h.support, cur_l))
        if h.m * k1 > max_dim:
            raise DimensionBudgetError(f"level {chain.v + 1}: dimension {h.m * k1} exceeds {max_dim}")
        hs = half_step(h, cur_l)
        n_k *= len(hs.s1)
        chain.levels.append(
            ChainLevel(
                hs, len(cur.support), len(hs.s1), n_k, hs.output_map.m, hs.theta, hs.a_tilde_norm
            )
        )
        cur, cur_l = hs.output_map, (cur_l + 1) // 2
    return chain


@dataclass(frozen=True)
class EpsilonPropagation:
    exact: float
    closed_form: float
    admissible: bool
    closed_form_admissible: bool


def propagate_epsilon(eps: float, l: int, s_size: int) -> EpsilonPropagation:
    """Propagate a relative error through the chain.

    Returns the exact product ``eps * prod_{i=1}^v 4 * 4^i * |S|`` and the
    closed form ``2 eps l^2 |S|^v l^(v-1)``; admissibility (``< 1``) is
    decided on the exact product.
    """
    if not 0 <= eps < 1:
        raise ValueError("need 0 <= eps < 1")
    v = math.ceil(math.log2(l)) if l > 1 else 0
    exact = eps
    for i in range(1, v + 1):
        exact *= 4 * 4**i * s_size
    closed = 2 * eps * l**2 * s_size**v * l ** (v - 1)
    return EpsilonPropagation(exact, closed, exact < 1, closed < 1)


def chain_dimensions(support: SupportSet, l: int) -> list:
    """Per-level ``(|S_k|, |S1|, n_k)`` from the supports alone (same ``n_k`` as the chain).

    Matches :func:`build_chain` whenever no coefficient vanishes
    accidentally, and is cheap for supports whose numeric chain is large.
    """
    out = []
    cur, cur_l, n_k = support, l, 1
    while cur_l > 1:
        s1 = split_support(cur.symmetric_closure(), cur_l)
        n_k *= len(s1)
        out.append((len(cur), len(s1), n_k))
        cur, cur_l = s1, (cur_l + 1) // 2
    return out


def random_instance(
    rng: np.random.Generator, d: int = 2, l: int = 2, s_max: int = 6, m: int = 1
) -> CoefficientMap:
    """Random hermitized coefficient map (size ``2m``) with support of size at most ``s_max``.

    The support is symmetric, lies in B_l and contains a word of length
    ``l``. Coefficients are independent complex Gaussians before
    hermitization, so the assembled operator has spectrum symmetric about 0
    and its norm equals its largest eigenvalue.
    """
    words = [w for w in ball(d, l).sorted() if w]
    longest = [w for w in words if len(w) == l]
    first = longest[rng.integers(len(longest))]
    pool = [first] + [words[i] for i in rng.permutation(len(words))]
    budget = int(rng.integers(2, s_max + 1))
    support: list = []
    for w in pool:
        if len(support) + 2 > budget:
            break
        if w not in support:
            support += [w, inv(w)]
    if len(support) < budget:
        support.append(())
    ent = {w: rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m)) for w in support}
    return hermitize(CoefficientMap(m, ent, d))
