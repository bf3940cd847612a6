"""Cusp cutoffs, resolvent and remainder kernels, and discretized operators.

The free resolvent of the Laplacian on the hyperbolic plane at spectral
parameter ``s`` is the radial kernel

    R(s; r) = (1 / 4 pi) int_0^1 (t (1 - t))^(s - 1) (t + sinh^2(r / 2))^(-s) dt,

which is evaluated either by adaptive quadrature (reference) or through
the equivalent Gauss hypergeometric closed form (fast, vectorized).
Cutting the kernel off between radii ``T`` and ``T + 1`` leaves a remainder
kernel ``L`` supported on that shell; integrating it against the
translates of a fundamental domain gives the operators ``a_gamma``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .hyperbolic import FordDomain, SurfaceModel, cosh_distance, moebius, word_to_moebius
from .free_group import Word

# ---------------------------------------------------------------------------
# smooth step templates


def smootherstep(x, deriv: int = 0):
    """Quintic ``6x^5 - 15x^4 + 10x^3`` clamped to [0, 1], or its derivatives.

    The first two derivatives vanish at both ends, so the clamped function is
    C^2. ``sup S' = 15/8`` and ``sup |S''| = 10/sqrt(3)``.
    """
    x = np.asarray(x, dtype=float)
    xc = np.clip(x, 0.0, 1.0)
    inside = (x > 0.0) & (x < 1.0)
    if deriv == 0:
        return xc**3 * (xc * (6.0 * xc - 15.0) + 10.0)
    if deriv == 1:
        return np.where(inside, 30.0 * xc**2 * (xc - 1.0) ** 2, 0.0)
    if deriv == 2:
        return np.where(inside, 60.0 * xc * (xc - 1.0) * (2.0 * xc - 1.0), 0.0)
    raise ValueError("deriv must be 0, 1 or 2")


SMOOTHERSTEP_SUP_D1 = 15.0 / 8.0
SMOOTHERSTEP_SUP_D2 = 10.0 / math.sqrt(3.0)


class CutoffError(ArithmeticError):
    """A sampled cutoff violates one of its certified bounds."""


@dataclass(frozen=True)
class CutoffPair:
    """Cusp cutoffs in the height coordinate ``t``.

    ``chi_plus`` rises from 0 at ``t = 1`` to 1 at ``t = tau_n`` and is the
    template ``chi_0(t) = S((t - 1)/(tau0 - 1))`` rescaled as
    ``chi_0((kappa/60)(t - 1) + 1)``. ``chi_minus`` rises from 0 at ``tau_n``
    to 1 at ``2 tau_n``, so ``chi_plus * chi_minus = chi_minus``.
    """

    kappa: float
    tau0: float

    @property
    def rate(self) -> float:
        return self.kappa / 60.0

    @property
    def tau_n(self) -> float:
        return (self.tau0 - 1.0) / self.rate + 1.0

    def chi_zero(self, t, deriv: int = 0):
        """Template cutoff on [1, tau0]."""
        w = self.tau0 - 1.0
        return smootherstep((np.asarray(t, dtype=float) - 1.0) / w, deriv) / w**deriv

    def chi_plus(self, t, deriv: int = 0):
        t = np.asarray(t, dtype=float)
        val = self.chi_zero(self.rate * (t - 1.0) + 1.0, deriv) * self.rate**deriv
        if deriv == 0:
            val = np.where(t >= self.tau_n, 1.0, val)
        return val

    def chi_minus(self, t, deriv: int = 0):
        t = np.asarray(t, dtype=float)
        tn = self.tau_n
        return smootherstep((t - tn) / tn, deriv) / tn**deriv

    def sup_bounds(self) -> dict:
        """Certified suprema from the template constants."""
        w = self.tau0 - 1.0
        d1 = self.rate * SMOOTHERSTEP_SUP_D1 / w
        d2 = self.rate**2 * SMOOTHERSTEP_SUP_D2 / w**2
        return {"d1": d1, "d2": d2, "d2_minus_d1": d1 + d2, "target": self.kappa / 30.0}

    def verify(self, points: int = 10**4) -> dict:
        """Check the invariants on a uniform grid over [0, 3 tau_n].

        Raises
        ------
        CutoffError
            With the first violating point.
        """
        t = np.linspace(0.0, 3.0 * self.tau_n, points)
        t = np.union1d(t, [0.5, 1.0, self.tau_n, 2.0 * self.tau_n])
        cp = self.chi_plus(t)
        cm = self.chi_minus(t)
        d1 = self.chi_plus(t, 1)
        d2 = self.chi_plus(t, 2)
        target = self.kappa / 30.0
        checks = {
            "chi_plus_zero_below_1": (t <= 1.0, cp == 0.0),
            "chi_plus_one_above_tau_n": (t >= self.tau_n, cp == 1.0),
            "chi_minus_zero_below_tau_n": (t <= self.tau_n, cm == 0.0),
            "chi_minus_one_above_2tau_n": (t >= 2.0 * self.tau_n, cm == 1.0),
            "stagger": (np.ones_like(t, bool), cp * cm == cm),
            "d1_bound": (np.ones_like(t, bool), np.abs(d1) <= target),
            "d2_minus_d1_bound": (np.ones_like(t, bool), np.abs(d2 - d1) <= target),
        }
        for name, (where, ok) in checks.items():
            bad = where & ~ok
            if bad.any():
                raise CutoffError(f"{name} fails at t = {t[np.argmax(bad)]!r}")
        return {"sup_d1": float(np.abs(d1).max()), "sup_d2_minus_d1": float(np.abs(d2 - d1).max())}


def build_cutoffs(kappa: float, tau0: float = 3.5, verify: bool = True) -> CutoffPair:
    """Cutoff pair for cusp parameter ``kappa`` in (0, 1].

    ``tau0 = 3.5`` makes the template's first and second derivatives at most
    0.75 and 0.93.
    """
    if not 0 < kappa <= 1:
        raise ValueError("need 0 < kappa <= 1")
    w = tau0 - 1.0
    if SMOOTHERSTEP_SUP_D1 / w > 1.0 or SMOOTHERSTEP_SUP_D2 / w**2 > 1.0:
        raise CutoffError(f"template derivatives exceed 1 for tau0 = {tau0}")
    pair = CutoffPair(float(kappa), float(tau0))
    if verify:
        pair.verify()
    return pair


def cusp_norm_bound(pair: CutoffPair) -> float:
    """``(sup|chi'' - chi'| + 2 sup|chi'|) * 5 / (4 kappa)`` from certified suprema."""
    b = pair.sup_bounds()
    return (b["d2_minus_d1"] + 2.0 * b["d1"]) * 5.0 / (4.0 * pair.kappa)


# ---------------------------------------------------------------------------
# resolvent kernel


def _check_s(s: float) -> None:
    if not 0.5 <= s <= 1.0:
        raise ValueError("need 1/2 <= s <= 1")


def resolvent_kernel(s: float, r: float) -> float:
    """Resolvent kernel by adaptive quadrature (reference evaluation).

    The factor ``(t(1-t))^(s-1)`` is passed to QUADPACK as an algebraic
    endpoint weight, which handles the singularity at ``s`` near 1/2.
    """
    _check_s(s)
    if r <= 0:
        raise ValueError("r must be positive")
    u = math.sinh(r / 2.0) ** 2
    val, _ = integrate.quad(
        lambda t: (t + u) ** (-s), 0.0, 1.0, weight="alg", wvar=(s - 1.0, s - 1.0),
        epsabs=0.0, epsrel=1e-12, limit=200,
    )
    return val / (4.0 * math.pi)


def resolvent_kernel_dr(s: float, r: float) -> float:
    """Radial derivative by quadrature (differentiation under the integral)."""
    _check_s(s)
    if r <= 0:
        raise ValueError("r must be positive")
    u = math.sinh(r / 2.0) ** 2
    val, _ = integrate.quad(
        lambda t: (t + u) ** (-s - 1.0), 0.0, 1.0, weight="alg", wvar=(s - 1.0, s - 1.0),
        epsabs=0.0, epsrel=1e-12, limit=200,
    )
    return -s * math.sinh(r) / 2.0 * val / (4.0 * math.pi)


def resolvent_values(s: float, r, deriv: bool = False):
    """Vectorized kernel (and radial derivative) via the hypergeometric form.

    With ``u = sinh^2(r/2)`` and ``z = 1/(1+u)``,
    ``R = B(s,s) / (4 pi) (1+u)^(-s) 2F1(s, s; 2s; z)``, and
    ``dR/dr = -s sinh(r)/2 B(s,s)/(4 pi) (1+u)^(-s-1) 2F1(s+1, s; 2s; z)``.
    """
    _check_s(s)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    u = np.sinh(r / 2.0) ** 2
    z = 1.0 / (1.0 + u)
    c = special.beta(s, s) / (4.0 * math.pi)
    val = c * z**s * special.hyp2f1(s, s, 2.0 * s, z)
    if not deriv:
        return val
    dval = -s * np.sinh(r) / 2.0 * c * z ** (s + 1.0) * special.hyp2f1(s + 1.0, s, 2.0 * s, z)
    return val, dval


def resolvent_s1_closed_form(r):
    """``(1 / 2 pi) log coth(r / 2)``, the kernel at ``s = 1``."""
    r = np.asarray(r, dtype=float)
    return np.log(1.0 / np.tanh(r / 2.0)) / (2.0 * math.pi)


# ---------------------------------------------------------------------------
# remainder kernel


def shell_cutoff(r, T: float, deriv: int = 0):
    """``chi_T(r) = 1 - S(r - T)``: 1 below ``T``, 0 above ``T + 1``."""
    x = np.asarray(r, dtype=float) - T
    if deriv == 0:
        return 1.0 - smootherstep(x)
    return -smootherstep(x, deriv)


def remainder_kernel(s: float, T: float, r0):
    """Remainder kernel ``(-chi'' - coth(r) chi') R - 2 chi' dR/dr`` on the shell.

    Returns literal zeros for ``r0`` outside the open interval (T, T + 1).
    """
    _check_s(s)
    r0 = np.asarray(r0, dtype=float)
    out = np.zeros(r0.shape)
    inside = (r0 > T) & (r0 < T + 1.0)
    if inside.any():
        r = r0[inside]
        R, dR = resolvent_values(s, r, deriv=True)
        c1 = shell_cutoff(r, T, 1)
        c2 = shell_cutoff(r, T, 2)
        out[inside] = (-c2 - c1 / np.tanh(r)) * R - 2.0 * c1 * dR
    return float(out) if out.ndim == 0 else out


def remainder_constant(Ts, ss, points: int = 50) -> float:
    """Smallest ``C`` with ``|L(s; r0)| <= C e^{-s r0}`` over the given grid."""
    best = 0.0
    for T in Ts:
        r = np.linspace(T, T + 1.0, points)
        for s in ss:
            best = max(best, float(np.max(np.abs(remainder_kernel(s, T, r)) * np.exp(s * r))))
    return best


def kernel_table(s_values, T: float, r_grid) -> str:
    """CSV with columns s, T, r, R, dR/dr, L."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["s", "T", "r", "R", "dR_dr", "L"])
    r_grid = np.asarray(r_grid, dtype=float)
    for s in s_values:
        R, dR = resolvent_values(s, r_grid, deriv=True)
        L = remainder_kernel(s, T, r_grid)
        for row in zip(r_grid, R, dR, np.atleast_1d(L)):
            wr.writerow([f"{s:.12g}", f"{T:.12g}"] + [f"{x:.12g}" for x in row])
    return buf.getvalue()


def kernel_s_derivative(s: float, T: float, r0, h: float = 1e-4):
    """Central difference of the remainder kernel in ``s``.

    One-sided near the ends of [1/2, 1].
    """
    lo, hi = max(0.5, s - h), min(1.0, s + h)
    return (remainder_kernel(hi, T, r0) - remainder_kernel(lo, T, r0)) / (hi - lo)


def kernel_s_derivative_check(
    T: float, r0=None, h: float = 1e-4, s_values=None
) -> dict:
    """Largest ``|dL/ds|`` over an (s, r0) grid at steps ``h`` and ``h/2``."""
    if r0 is None:
        r0 = np.linspace(T, T + 1.0, 41)
    if s_values is None:
        s_values = np.linspace(0.55, 1.0, 10)
    r0 = np.asarray(r0, dtype=float)
    m_h = max(float(np.max(np.abs(kernel_s_derivative(s, T, r0, h)))) for s in s_values)
    m_h2 = max(float(np.max(np.abs(kernel_s_derivative(s, T, r0, h / 2)))) for s in s_values)
    return {"max_h": m_h, "max_h2": m_h2, "relative_change": abs(m_h - m_h2) / max(m_h, 1e-300)}


# ---------------------------------------------------------------------------
# operator norm bounds for radial kernels


def spherical_function(r):
    """Spherical function at the bottom of the tempered spectrum.

    ``Xi(r) = P_{-1/2}(cosh r) = 2 K(tanh^2(r/2)) / (pi cosh(r/2))`` with
    ``K`` the complete elliptic integral of the first kind (parameter m).
    """
    r = np.asarray(r, dtype=float)
    return 2.0 * special.ellipk(np.tanh(r / 2.0) ** 2) / (math.pi * np.cosh(r / 2.0))


def _shell_integral(f, T: float) -> float:
    val, _ = integrate.quad(f, T, T + 1.0, limit=200, epsabs=0.0, epsrel=1e-10)
    return val


def schur_bound(s: float, T: float) -> float:
    """``2 pi int |L(s; r)| sinh r dr``: the L^1 (Young/Schur) bound."""
    return 2.0 * math.pi * _shell_integral(lambda r: abs(remainder_kernel(s, T, r)) * math.sinh(r), T)


def spherical_bound(s: float, T: float) -> float:
    """``2 pi int |L(s; r)| Xi(r) sinh r dr``.

    For a radial kernel ``k`` the convolution operator on L^2 of the plane
    has norm ``sup |spherical transform of k|`` over the tempered spectrum,
    which is at most the integral of ``|k|`` against ``Xi``.
    """
    return 2.0 * math.pi * _shell_integral(
        lambda r: abs(remainder_kernel(s, T, r)) * float(spherical_function(r)) * math.sinh(r), T
    )


def envelope_shape(s: float, T: float) -> float:
    """``T e^{(1/2 - s) T}``."""
    return T * math.exp((0.5 - s) * T)


def fit_envelope(s: float, Ts, bound=spherical_bound) -> dict:
    """Fit ``bound(s, T) ~ C T e^{(1/2 - s) T}`` by least squares in log scale.

    Returns the fitted ``C`` and the per-T ratios ``bound / (C * shape)``.
    """
    ratios = np.array([bound(s, T) / envelope_shape(s, T) for T in Ts])
    C = float(np.exp(np.mean(np.log(ratios))))
    return {"C": C, "per_T": ratios.tolist(), "relative": (ratios / C).tolist()}


def operator_norm_envelope(s: float, T: float, C: float | None = None) -> dict:
    """Schur and spherical bounds for the remainder operator next to the envelope."""
    if s <= 0.5:
        raise ValueError("need s > 1/2")
    out = {
        "schur": schur_bound(s, T),
        "spherical": spherical_bound(s, T),
        "shape": envelope_shape(s, T),
    }
    if C is not None:
        out["envelope"] = C * out["shape"]
    return out


def kappa_pairing(T: float) -> float:
    """``kappa = 4 (log T)^2 / T^2``, for which ``T sqrt(kappa) = 2 log T``."""
    return 4.0 * math.log(T) ** 2 / T**2


def envelope_admissibility(T: float, kappa: float | None = None) -> float:
    """``T e^{-T sqrt(kappa)}`` (equals ``1/T`` under the pairing)."""
    kappa = kappa_pairing(T) if kappa is None else kappa
    return T * math.exp(-T * math.sqrt(kappa))


# ---------------------------------------------------------------------------
# fundamental-domain quadrature and discretized operators


HS_BUDGET = 1.0  # default Hilbert-Schmidt budget per coefficient


class GridError(ValueError):
    """Quadrature weights do not reproduce the area of the region."""


@dataclass(frozen=True)
class GridSpec:
    """Node counts of the two-zone fundamental-domain grid.

    The low zone (below the height where the horizontal cycle of the cusp has
    hyperbolic length 1) uses ``n_x`` columns of ``n_u`` cells; the cusp zone
    above it uses ``cusp_x`` columns of ``cusp_u`` cells. The default has
    400 nodes.
    """

    n_x: int = 20
    n_u: int = 12
    cusp_x: int = 4
    cusp_u: int = 40

    @property
    def size(self) -> int:
        return self.n_x * self.n_u + self.cusp_x * self.cusp_u

    def refined(self) -> "GridSpec":
        return GridSpec(2 * self.n_x, 2 * self.n_u, 2 * self.cusp_x, 2 * self.cusp_u)


@dataclass(frozen=True)
class FundamentalGrid:
    """Quadrature nodes ``points`` and weights for ``dx dy / y^2`` on a truncated domain."""

    points: np.ndarray
    weights: np.ndarray
    y_top: float
    area: float

    @property
    def size(self) -> int:
        return self.points.size


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _zone(left: float, width: float, nx: int, nu: int, u_low, u_high: float):
    dx = width / nx
    xs = left + dx * (np.arange(nx) + 0.5)
    u0 = u_low(xs)
    edges = u0[:, None] + (u_high - u0)[:, None] * (np.arange(nu + 1) / nu)[None, :]
    offset = np.mod(0.5 + np.arange(nx) * _GOLDEN, 1.0)
    uu = edges[:, :-1] + offset[:, None] * np.diff(edges, axis=1)
    pts = xs[:, None] + 1j * np.exp(uu)
    wts = dx * -np.diff(np.exp(-edges), axis=1)
    return pts.ravel(), wts.ravel()


def build_fundamental_grid(
    domain: FordDomain, y_top: float, spec: GridSpec, area_tol: float = 0.05
) -> FundamentalGrid:
    """Cell quadrature in ``(x, u = log y)`` on ``{z in domain : y <= y_top}``.

    Each column is cut into equal cells in ``u`` carrying their exact
    measure ``dx (e^{-u_k} - e^{-u_{k+1}})``. The node of a cell sits at a
    column-dependent offset (golden-ratio sequence) so that distances
    between nodes do not cluster on a few values, which would alias the
    unit-width kernel shell. The cusp zone starts at height ``width``.

    Raises
    ------
    GridError
        If the weights miss the truncated area by more than ``area_tol``.
    """
    y_cusp = domain.width
    if y_top <= y_cusp:
        raise ValueError("y_top must exceed the cusp width")
    low = _zone(domain.left, domain.width, spec.n_x, spec.n_u,
                lambda xs: np.log(domain.floor(xs)), math.log(y_cusp))
    high = _zone(domain.left, domain.width, spec.cusp_x, spec.cusp_u,
                 lambda xs: np.full(xs.shape, math.log(y_cusp)), math.log(y_top))
    pts = np.concatenate([low[0], high[0]])
    wts = np.concatenate([low[1], high[1]])
    area = domain.area() - domain.width / y_top
    total = float(wts.sum())
    if abs(total - area) > area_tol * area:
        raise GridError(f"weights sum to {total:.6g}, region area is {area:.6g}")
    return FundamentalGrid(pts, wts, float(y_top), area)


def grid_for(model: SurfaceModel, T: float, kappa: float, spec: GridSpec, cutoffs: CutoffPair | None = None) -> FundamentalGrid:
    """Grid reaching height ``2 tau_n e^{T+1}``: the support of ``1 - chi_minus`` plus kernel reach."""
    if model.domain is None:
        raise ValueError("model has no fundamental domain description")
    cutoffs = cutoffs or build_cutoffs(kappa, verify=False)
    return build_fundamental_grid(model.domain, 2.0 * cutoffs.tau_n * math.exp(T + 1.0), spec)


@dataclass
class ShellGeometry:
    """Node pairs ``(i, j)`` with ``T < d(gamma x_i, y_j) < T + 1`` and their distances."""

    gamma: Word
    rows: np.ndarray
    cols: np.ndarray
    dist: np.ndarray
    factor: np.ndarray  # sqrt(w_i) sqrt(w_j) (1 - chi_minus(y_j))


def shell_geometry(model: SurfaceModel, gamma: Word, T: float, grid: FundamentalGrid, cutoffs: CutoffPair) -> ShellGeometry:
    g = word_to_moebius(model, gamma)
    gx = moebius(g, grid.points)
    ch = cosh_distance(gx[:, None], grid.points[None, :])
    lo, hi = math.cosh(T), math.cosh(T + 1.0)
    rows, cols = np.nonzero((ch > lo) & (ch < hi))
    dist = np.arccosh(ch[rows, cols])
    sw = np.sqrt(grid.weights)
    damp = 1.0 - cutoffs.chi_minus(grid.points.imag)
    factor = sw[rows] * sw[cols] * damp[cols]
    keep = factor != 0.0
    return ShellGeometry(tuple(gamma), rows[keep], cols[keep], dist[keep], factor[keep])


@dataclass
class DiscretizedAGamma:
    """Nystrom matrix of ``a_gamma`` on a fundamental-domain grid.

    ``matrix[i, j] = sqrt(w_i) L(s; d(gamma x_i, y_j)) (1 - chi_minus(y_j)) sqrt(w_j)``,
    so the matrix acts isometrically like the integral operator on
    L^2 of the domain: its Frobenius norm is the Hilbert-Schmidt norm.
    """

    gamma: Word
    s: float
    T: float
    matrix: np.ndarray
    singular_values: np.ndarray = field(init=False)
    hs_norm: float = field(init=False)

    def __post_init__(self):
        self.singular_values = np.linalg.svd(self.matrix, compute_uv=False)
        self.hs_norm = float(np.linalg.norm(self.matrix))

    @property
    def operator_norm(self) -> float:
        return float(self.singular_values[0]) if self.singular_values.size else 0.0

    def within_hs_budget(self, budget: float = HS_BUDGET) -> bool:
        return self.hs_norm <= budget

    def singular_values_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["index", "singular_value"])
        for k, v in enumerate(self.singular_values):
            wr.writerow([k, f"{v:.12g}"])
        return buf.getvalue()


def assemble_shell(shell: ShellGeometry, s: float, T: float, n: int) -> np.ndarray:
    mat = np.zeros((n, n))
    if shell.rows.size:
        mat[shell.rows, shell.cols] = remainder_kernel(s, T, shell.dist) * shell.factor
    return mat


def discretize_a_gamma(
    model: SurfaceModel,
    gamma: Word,
    s: float,
    T: float,
    kappa: float,
    grid_spec: GridSpec | FundamentalGrid = GridSpec(),
) -> DiscretizedAGamma:
    """Discretize ``a_gamma(s)`` on a grid of the truncated fundamental domain."""
    cutoffs = build_cutoffs(kappa, verify=False)
    grid = grid_spec if isinstance(grid_spec, FundamentalGrid) else grid_for(model, T, kappa, grid_spec, cutoffs)
    shell = shell_geometry(model, gamma, T, grid, cutoffs)
    return DiscretizedAGamma(tuple(gamma), s, T, assemble_shell(shell, s, T, grid.size))


@dataclass
class Truncation:
    """Low-rank truncation of a discretized operator.

    ``error`` is the first discarded singular value (the spectral norm of the
    residual); ``rank_bound`` is ``400 C |S|^2`` with ``C = 1``.
    """

    rank: int
    matrix: np.ndarray
    error: float
    target: float
    reached: bool
    rank_bound: int


def svd_truncate(ag: DiscretizedAGamma | np.ndarray, s_size: int) -> Truncation:
    """Smallest rank whose residual has norm at most ``1 / (20 s_size)``."""
    mat = ag.matrix if isinstance(ag, DiscretizedAGamma) else np.asarray(ag)
    target = 1.0 / (20.0 * s_size)
    u, sv, vh = np.linalg.svd(mat)
    above = np.nonzero(sv > target)[0]
    rank = int(above[-1] + 1) if above.size else 0
    error = float(sv[rank]) if rank < sv.size else 0.0
    trunc = (u[:, :rank] * sv[:rank]) @ vh[:rank]
    return Truncation(rank, trunc, error, target, error <= target, 400 * s_size**2)


def deviation_check(
    model: SurfaceModel,
    gamma: Word,
    s1: float,
    s2: float,
    T: float,
    kappa: float,
    grid_spec: GridSpec | FundamentalGrid = GridSpec(),
) -> float:
    """``||a_gamma(s1) - a_gamma(s2)|| / |s1 - s2|`` in operator norm."""
    if s1 == s2:
        raise ValueError("need s1 != s2")
    cutoffs = build_cutoffs(kappa, verify=False)
    grid = grid_spec if isinstance(grid_spec, FundamentalGrid) else grid_for(model, T, kappa, grid_spec, cutoffs)
    shell = shell_geometry(model, gamma, T, grid, cutoffs)
    diff = assemble_shell(shell, s1, T, grid.size) - assemble_shell(shell, s2, T, grid.size)
    return float(np.linalg.norm(diff, 2)) / abs(s1 - s2)
