"""Coefficient maps, operator assembly and norm estimation.

An operator of the form ``sum_g a_g (x) rho(g)`` is described by a
:class:`CoefficientMap` (words to m x m matrices). It can be assembled
against a sampled representation, or compressed onto a ball of the Cayley
tree to obtain lower bounds for the norm in the regular representation.
Norms are computed with a Lanczos iteration implemented here.
"""

from __future__ import annotations

import json
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np
from scipy.linalg import eigh_tridiagonal, get_blas_funcs
from scipy.sparse import csr_matrix

from . import representations as reps
from .free_group import CayleyBall, SupportSet, Word, inv, reduce_word, shortlex_key


class ConvergenceError(RuntimeError):
    """Lanczos did not reach the requested tolerance.

    Attributes
    ----------
    bracket : tuple of float
        Lower and upper estimate of the norm at the last iterate.
    """

    def __init__(self, msg: str, bracket: tuple[float, float]):
        super().__init__(msg)
        self.bracket = bracket


class CoefficientMap:
    """Finitely supported map from reduced words to m x m complex matrices.

    Parameters
    ----------
    m : int
        Size of the coefficient matrices.
    entries : mapping
        Word (any letter sequence, reduced on input) to array of shape (m, m).
        Entries for the same reduced word are summed.
    d : int, optional
        Rank of the ambient free group. Defaults to the largest letter used.
    """

    def __init__(self, m: int, entries: Mapping, d: int | None = None):
        if m < 1:
            raise ValueError("m must be positive")
        store: dict = {}
        for w, a in entries.items():
            w = reduce_word(w, d)
            a = np.asarray(a, dtype=complex)
            if a.shape == () and m == 1:
                a = a.reshape(1, 1)
            if a.shape != (m, m):
                raise ValueError(f"coefficient of {w} has shape {a.shape}, expected {(m, m)}")
            store[w] = store[w] + a if w in store else a.copy()
        for a in store.values():
            a.setflags(write=False)
        self.m = m
        self._entries = MappingProxyType(dict(sorted(store.items(), key=lambda kv: shortlex_key(kv[0]))))
        letters = [abs(x) for w in store for x in w]
        self.d = d if d is not None else max(letters, default=1)

    @property
    def entries(self) -> Mapping:
        return self._entries

    def __getitem__(self, w) -> np.ndarray:
        w = tuple(w)
        if w in self._entries:
            return self._entries[w]
        return np.zeros((self.m, self.m), dtype=complex)

    def __iter__(self):
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return self._entries.items()

    @property
    def support(self) -> SupportSet:
        return SupportSet(frozenset(self._entries))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        """Whether a_{g^{-1}} = a_g^* for every g (so the operator is self-adjoint)."""
        scale = max((np.abs(a).max() for a in self._entries.values()), default=0.0)
        for w, a in self._entries.items():
            if np.abs(self[inv(w)] - a.conj().T).max() > tol * max(scale, 1.0):
                return False
        return True

    def adjoint(self) -> "CoefficientMap":
        return CoefficientMap(self.m, {inv(w): a.conj().T for w, a in self._entries.items()}, self.d)

    def prune(self, tol: float = 0.0) -> "CoefficientMap":
        """Drop coefficients with all entries at most ``tol`` in modulus."""
        return CoefficientMap(
            self.m, {w: a for w, a in self._entries.items() if np.abs(a).max() > tol}, self.d
        )

    @classmethod
    def generator_sum(cls, d: int) -> "CoefficientMap":
        """The scalar element sum_i (g_i + g_i^{-1})."""
        ent = {}
        for k in range(1, d + 1):
            ent[(k,)] = np.ones((1, 1))
            ent[(-k,)] = np.ones((1, 1))
        return cls(1, ent, d)

    def to_json(self) -> str:
        data = {
            "m": self.m,
            "d": self.d,
            "entries": [
                [list(w), [[float(z.real), float(z.imag)] for z in a.ravel()]]
                for w, a in self._entries.items()
            ],
        }
        return json.dumps(data, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CoefficientMap":
        data = json.loads(text)
        m = int(data["m"])
        ent = {}
        for w, flat in data["entries"]:
            arr = np.array([complex(re, im) for re, im in flat]).reshape(m, m)
            ent[tuple(w)] = arr
        return cls(m, ent, data.get("d"))


def hermitize(cm: CoefficientMap) -> CoefficientMap:
    """Self-adjoint dilation with coefficients [[0, a_g], [a_{g^{-1}}^*, 0]].

    The assembled operator is [[0, A], [A^*, 0]], whose norm equals that of A
    and whose spectrum is symmetric about zero.
    """
    m = cm.m
    words = set(cm.entries) | {inv(w) for w in cm.entries}
    out = {}
    for w in words:
        b = np.zeros((2 * m, 2 * m), dtype=complex)
        b[:m, m:] = cm[w]
        b[m:, :m] = cm[inv(w)].conj().T
        out[w] = b
    return CoefficientMap(2 * m, out, cm.d)


class AssembledOperator:
    """Linear operator on C^m (x) C^N given by matvec callables.

    Vectors are flat arrays of length m*N indexed by ``i*N + x``, which
    matches ``np.kron(a, b)``.
    """

    def __init__(
        self,
        dim: int,
        matvec: Callable[[np.ndarray], np.ndarray],
        rmatvec: Callable[[np.ndarray], np.ndarray],
        hermitian: bool,
        dense: np.ndarray | None = None,
        dtype=complex,
    ):
        self.dim = dim
        self.shape = (dim, dim)
        self.matvec = matvec
        self.rmatvec = rmatvec
        self.hermitian = hermitian
        self.dense = dense
        self.dtype = np.dtype(dtype)

    @classmethod
    def from_dense(cls, a: np.ndarray, hermitian: bool | None = None) -> "AssembledOperator":
        a = np.asarray(a)
        if hermitian is None:
            hermitian = bool(np.allclose(a, a.conj().T, atol=1e-12 * max(1.0, np.abs(a).max(initial=0.0))))
        return cls(a.shape[0], lambda x: a @ x, lambda x: a.conj().T @ x, hermitian, dense=a, dtype=a.dtype)

    def to_dense(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        eye = np.eye(self.dim, dtype=self.dtype)
        return np.column_stack([self.matvec(eye[:, j]) for j in range(self.dim)])


def assemble(
    cm: CoefficientMap,
    rep: reps.RepresentationSample,
    zero_mean: bool = False,
    dense_cap: int = 4000,
) -> AssembledOperator:
    """Assemble ``sum_g a_g (x) rho(g)``.

    Parameters
    ----------
    cm : CoefficientMap
    rep : RepresentationSample
    zero_mean : bool
        Compress rho to the zero-mean subspace (as an operator on C^n that
        vanishes on constants).
    dense_cap : int
        Build a dense matrix when the total dimension is at most this.
    """
    if cm.d > rep.d:
        raise ValueError("coefficient support uses letters beyond the representation rank")
    m, n = cm.m, rep.n
    dim = m * n
    hermitian = cm.is_hermitian()
    if dim <= dense_cap:
        a = np.zeros((dim, dim), dtype=complex)
        for w, c in cm.items():
            r = reps.restrict_zero_mean(rep, w) if zero_mean else reps.evaluate(rep, w)
            a += np.kron(c, r)
        return AssembledOperator(dim, lambda x: a @ x, lambda x: a.conj().T @ x, hermitian, dense=a)

    terms = []
    for w, c in cm.items():
        if rep.flavor == "permutation":
            p = reps.evaluate_permutation(rep, w)
            terms.append((c, np.argsort(p), p))
        else:
            terms.append((c, reps.evaluate(rep, w), None))

    def apply(x: np.ndarray, adjoint: bool) -> np.ndarray:
        x = x.reshape(m, n)
        if zero_mean:
            x = x - x.mean(axis=1, keepdims=True)
        y = np.zeros((m, n), dtype=complex)
        for c, g, p in terms:
            cc = c.conj().T if adjoint else c
            if p is not None:
                # rho(w) v = v[p^{-1}], rho(w)^* v = v[p]
                y += cc @ x[:, p if adjoint else g]
            else:
                y += cc @ (x @ (g.conj() if adjoint else g.T))
        if zero_mean:
            y -= y.mean(axis=1, keepdims=True)
        return y.ravel()

    return AssembledOperator(dim, lambda x: apply(x, False), lambda x: apply(x, True), hermitian)


def triangle_upper(cm: CoefficientMap) -> float:
    """Upper bound sum_g ||a_g|| valid in every unitary representation."""
    return float(sum(np.linalg.norm(a, 2) for a in cm.entries.values()))


# ---------------------------------------------------------------------------
# Lanczos


def _lanczos_extremes(
    matvec: Callable[[np.ndarray], np.ndarray],
    dim: int,
    dtype,
    rng: np.random.Generator,
    tol: float,
    maxiter: int,
    ends: str,
    reorth_entries: int = 4 * 10**7,
) -> tuple[float, float, float, float, int]:
    """Extremal Ritz values of a Hermitian operator.

    Returns ``(theta_min, theta_max, res_min, res_max, iterations)`` where the
    residuals are the usual ``beta_k |y_k|`` estimates. ``ends`` is "both"
    or "max" and controls which end has to converge.
    """
    complex_ = np.issubdtype(np.dtype(dtype), np.complexfloating)
    full = dim <= 200_000
    kmax = max(10, min(maxiter, dim, reorth_entries // max(dim, 1))) if full else maxiter

    def start() -> np.ndarray:
        v = rng.standard_normal(dim)
        if complex_:
            v = v + 1j * rng.standard_normal(dim)
        return v / np.linalg.norm(v)

    v = start()
    total = 0
    last = (0.0, 0.0, np.inf, np.inf)
    while True:
        if full:
            basis = np.empty((kmax + 1, dim), dtype=v.dtype)
            basis[0] = v
        nb = 1
        alpha: list[float] = []
        beta: list[float] = []
        v_prev = np.zeros_like(v)
        b = 0.0
        exhausted = False
        ritz = None
        for k in range(kmax):
            w = matvec(v)
            total += 1
            if w is v or not w.flags.writeable:
                w = w.copy()
            w = np.asarray(w, dtype=v.dtype)
            a = float(np.vdot(v, w).real)
            axpy = get_blas_funcs("axpy", (w,))
            w = axpy(v, w, a=-a)
            if b:
                w = axpy(v_prev, w, a=-b)
            if full:
                vb = basis[:nb]
                for _ in range(2):
                    w = w - vb.T @ (vb.conj() @ w)
            b_new = float(np.linalg.norm(w))
            alpha.append(a)
            scale = max(abs(x) for x in alpha) + (max(beta) if beta else 0.0)
            exhausted = b_new <= 1e-13 * max(scale, 1e-300) or (full and nb >= dim)
            check = k < 40 or k % 5 == 4 or exhausted or k == kmax - 1 or total >= maxiter
            if check:
                if len(alpha) == 1:
                    vals = np.array([alpha[0]])
                    vecs = np.ones((1, 1))
                else:
                    vals, vecs = eigh_tridiagonal(np.array(alpha), np.array(beta))
                res = np.abs(vecs[-1, :]) * (0.0 if exhausted else b_new)
                th_min, th_max = float(vals[0]), float(vals[-1])
                r_min, r_max = float(res[0]), float(res[-1])
                last = (th_min, th_max, r_min, r_max)
                ritz = (vals, vecs)
                if _converged(last, tol, ends):
                    return th_min, th_max, r_min, r_max, total
            if exhausted or total >= maxiter:
                break
            beta.append(b_new)
            w *= 1.0 / b_new
            v_prev, v = v, w
            b = b_new
            if full:
                basis[nb] = v
                nb += 1
        if exhausted:
            # invariant subspace reached from this start: results are exact there
            return last[0], last[1], last[2], last[3], total
        if total >= maxiter:
            lo_hi = _bracket(last)
            raise ConvergenceError(
                f"Lanczos did not converge in {total} iterations", lo_hi
            )
        # explicit restart from a blend of the extremal Ritz vectors
        vals, vecs = ritz
        vb = basis[: vecs.shape[0]]
        y = vecs[:, -1] + (vecs[:, 0] if ends == "both" else 0.0)
        v = vb.T @ y
        v = v / np.linalg.norm(v)


def _converged(state, tol, ends) -> bool:
    th_min, th_max, r_min, r_max = state
    if ends == "max":
        return r_max <= tol * abs(th_max) or (th_max == 0.0 and r_max == 0.0)
    top, r_top, other, r_other = (
        (th_max, r_max, th_min, r_min) if abs(th_max) >= abs(th_min) else (th_min, r_min, th_max, r_max)
    )
    if top == 0.0:
        return r_top == 0.0 and r_other == 0.0
    ok_top = r_top <= tol * abs(top)
    ok_other = r_other <= tol * abs(other) or abs(other) + r_other <= abs(top) * (1 + tol)
    return ok_top and ok_other


def _bracket(state) -> tuple[float, float]:
    th_min, th_max, r_min, r_max = state
    lo = max(abs(th_min), abs(th_max))
    hi = max(abs(th_min) + r_min, abs(th_max) + r_max)
    return lo, hi


def spectral_norm(
    op,
    tol: float = 1e-9,
    seed: int = 0,
    maxiter: int = 10000,
) -> float:
    """Operator norm by Lanczos.

    Hermitian operators are handled directly (largest modulus of the extreme
    Ritz values); others through ``A^* A``.

    Parameters
    ----------
    op : AssembledOperator or ndarray
    tol : float
        Relative tolerance on the norm.
    seed : int
        Seed of the random start vector.
    maxiter : int
        Total number of operator applications allowed.

    Raises
    ------
    ConvergenceError
        When the tolerance is not reached in ``maxiter`` steps.
    """
    if not isinstance(op, AssembledOperator):
        op = AssembledOperator.from_dense(np.asarray(op))
    if op.dim == 0:
        return 0.0
    rng = reps.make_rng(seed)
    dtype = np.result_type(op.dtype, float)
    if op.hermitian:
        th_min, th_max, *_ = _lanczos_extremes(op.matvec, op.dim, dtype, rng, tol, maxiter, "both")
        return max(abs(th_min), abs(th_max))
    try:
        _, th_max, *_ = _lanczos_extremes(
            lambda x: op.rmatvec(op.matvec(x)), op.dim, dtype, rng, 2 * tol, maxiter, "max"
        )
    except ConvergenceError as err:
        lo, hi = err.bracket
        raise ConvergenceError(str(err), (np.sqrt(lo), np.sqrt(hi))) from None
    return float(np.sqrt(max(th_max, 0.0)))


# ---------------------------------------------------------------------------
# Regular representation compressed to balls


def regular_operator(cm: CoefficientMap, R: int, budget: int = 10**6, d: int | None = None) -> AssembledOperator:
    """``sum_g a_g (x) lambda(g)`` compressed to l^2(B_R).

    ``lambda`` is the right regular representation, ``lambda(g) delta_y =
    delta_{y g^{-1}}``. The compression is applied matrix-free.
    """
    d = d if d is not None else cm.d
    if cm.support.radius > 0 and max(abs(a) for w in cm for a in w) > d:
        raise ValueError("support uses letters beyond rank d")
    tree = CayleyBall(d, R, budget=budget)
    N, m = tree.size, cm.m
    real = all(not np.any(a.imag) for a in cm.entries.values())
    dtype = float if real else complex
    terms = []
    for w, a in cm.items():
        src, tgt = tree.translation_pairs(inv(w))
        shift = csr_matrix(
            (np.ones(src.size), (tgt.astype(np.int32), src.astype(np.int32))), shape=(N, N)
        )
        terms.append((a.real.copy() if real else a, shift))
    if m == 1:
        total = sum((a[0, 0] * shift for a, shift in terms), csr_matrix((N, N), dtype=dtype))
        total_h = total.conj().T.tocsr()
        return AssembledOperator(
            N, lambda x: total @ x, lambda x: total_h @ x, cm.is_hermitian(), dtype=dtype
        )

    def apply(x: np.ndarray, adjoint: bool) -> np.ndarray:
        xt = x.reshape(m, N).T
        y = np.zeros((N, m), dtype=np.result_type(dtype, x.dtype))
        for a, shift in terms:
            if adjoint:
                y += shift.T @ (xt @ a.conj())
            else:
                y += shift @ (xt @ a.T)
        return y.T.ravel()

    return AssembledOperator(
        m * N, lambda x: apply(x, False), lambda x: apply(x, True), cm.is_hermitian(), dtype=dtype
    )


def regular_norm_lower(
    cm: CoefficientMap,
    R: int,
    tol: float = 1e-9,
    budget: int = 10**6,
    seed: int = 0,
    d: int | None = None,
) -> float:
    """Lower bound for ``||sum_g a_g (x) lambda(g)||`` by compression to B_R.

    The value is non-decreasing in ``R`` and converges to the regular norm.
    """
    op = regular_operator(cm, R, budget=budget, d=d)
    return spectral_norm(op, tol=tol, seed=seed)
