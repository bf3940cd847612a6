"""Rate schedules, admissibility checks, epsilon-nets and the final verdict.

Two flavors are tracked. ``bundle`` refers to random unitary twists of
rank n and ``cover`` to random degree-n covers (permutation
representations restricted to the zero-mean subspace). For each flavor a
schedule ``T(n)``, ``kappa(n)`` determines the spectral interval
``s in [1/2 + sqrt(kappa), 1]`` and hence the gap ``1/4 - kappa``.
Unknown constants (``c1``, ``c2``, ``c3``) are inputs and are echoed in
every report.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from . import representations as reps
from .free_group import inv
from .hyperbolic import SurfaceModel, lattice_point_set
from .linearization import chain_dimension_bound
from .operator_lab import CoefficientMap, assemble, hermitize, spectral_norm
from .parametrix import (
    GridSpec,
    assemble_shell,
    build_cutoffs,
    cusp_norm_bound,
    grid_for,
    shell_geometry,
    svd_truncate,
)

FLAVORS = ("bundle", "cover")

NET_TARGET = Fraction(2, 5)
LIPSCHITZ_BUDGET = Fraction(1, 5)
INTERIOR_TARGET = Fraction(3, 5)
CUSP_BOUND = Fraction(1, 8)
TOTAL_CAP = Fraction(4, 5)
TRUNCATION_SLACK = Fraction(1, 20)


class ScheduleDomainError(ValueError):
    """``n`` is too small for the iterated logarithms of the schedule."""


def _width(d: int) -> int:
    return 32 * d + 160


@dataclass(frozen=True)
class RateSchedule:
    """Truncation radius and cusp parameter for a given ``n``.

    ``log_n`` is the natural logarithm of ``n``, so astronomically large
    ``n`` can be represented.
    """

    flavor: str
    d: int
    log_n: float
    T: float
    kappa: float

    @property
    def s_min(self) -> float:
        return 0.5 + math.sqrt(self.kappa)

    @property
    def gap_bound(self) -> float:
        return 0.25 - self.kappa

    @property
    def log10_n(self) -> float:
        return self.log_n / math.log(10.0)

    def gap_identity_residual(self) -> float:
        """``|(1/4 - kappa) - s_min (1 - s_min)|``."""
        return abs(self.gap_bound - self.s_min * (1.0 - self.s_min))

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(s_min=self.s_min, gap_bound=self.gap_bound, log10_n=self.log10_n)
        return out


def _log_n(n=None, log_n=None, log_log_n=None) -> float:
    if log_log_n is not None:
        # log n itself may overflow at cover-flavor scales
        return math.exp(log_log_n) if log_log_n < 700 else math.inf
    if log_n is not None:
        return float(log_n)
    if n is None:
        raise ValueError("give n, log_n or log_log_n")
    return math.log(n)


def bundle_kappa(log_n: float, d: int) -> float:
    x = log_n
    return 64.0 * _width(d) * math.log(x) ** 2 / x


def cover_kappa(log_log_n: float) -> float:
    y = log_log_n
    return 4.0 * 24.0**2 * math.log(y) ** 2 / y


def rate_schedule(flavor: str, n=None, d: int = 2, log_n=None, log_log_n=None) -> RateSchedule:
    """Evaluate the schedule of the given flavor.

    Parameters
    ----------
    flavor : {"bundle", "cover"}
    n : int, optional
        Dimension or degree (at least 16); alternatively pass ``log_n`` or
        ``log_log_n`` (natural logarithms).
    d : int
        Rank of the free group.
    """
    if flavor not in FLAVORS:
        raise ValueError(f"unknown flavor {flavor!r}")
    ln = _log_n(n, log_n, log_log_n)
    if ln <= 0 or math.log(ln) <= 0 or math.log(math.log(ln)) <= 0:
        raise ScheduleDomainError("n must be at least 16")
    lln = math.log(ln) if log_log_n is None else float(log_log_n)
    if flavor == "bundle":
        T = math.sqrt(ln) / (4.0 * math.sqrt(_width(d)))
        kappa = 64.0 * _width(d) * lln**2 / ln
    else:
        T = math.sqrt(lln) / 24.0
        kappa = cover_kappa(lln)
    return RateSchedule(flavor, d, ln, T, kappa)


def turning_point(flavor: str) -> dict:
    """Where ``kappa`` starts decreasing: ``log n = e^2`` (bundle) or ``log log n = e^2`` (cover)."""
    if flavor == "bundle":
        return {"log_n": math.exp(2.0), "log10_n": math.exp(2.0) / math.log(10.0)}
    return {"log_log_n": math.exp(2.0), "log10_log10_n": (math.exp(2.0) - math.log(math.log(10.0))) / math.log(10.0)}


def crossing_point(flavor: str, d: int = 2) -> dict:
    """Smallest ``n`` past the turning point with ``kappa(n) < 1/4``.

    Reported as ``log10 n`` for bundles and ``log10 log10 n`` for covers.
    """
    e2 = math.exp(2.0)
    if flavor == "bundle":
        f = lambda lx: math.log(bundle_kappa(math.exp(lx), d)) - math.log(0.25)
        lx = brentq(f, math.log(e2), 200.0, xtol=1e-14)
        log_n = math.exp(lx)
        return {"log_n": log_n, "log10_n": log_n / math.log(10.0)}
    f = lambda ly: math.log(cover_kappa(math.exp(ly))) - math.log(0.25)
    ly = brentq(f, math.log(e2), 200.0, xtol=1e-14)
    log_log_n = math.exp(ly)
    # log10 log10 n = (log log n - log log 10) / log 10
    return {
        "log_log_n": log_log_n,
        "log10_log10_n": (log_log_n - math.log(math.log(10.0))) / math.log(10.0),
    }


# ---------------------------------------------------------------------------
# admissibility


@dataclass(frozen=True)
class Condition:
    """One inequality ``lhs <= rhs`` stored as logarithms (``scale`` says how many)."""

    name: str
    lhs: float
    rhs: float
    scale: str
    holds: bool


@dataclass
class AdmissibilityReport:
    flavor: str
    log_n: float
    d: int
    l: int
    s_size: int
    m: int
    constant: float
    conditions: list
    probability_floor: float
    log_failure_probability: float

    @property
    def all_hold(self) -> bool:
        return all(c.holds for c in self.conditions)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["all_hold"] = self.all_hold
        return out


def _chain_logs(l: int, s_size: int) -> tuple[float, float]:
    """``log(l^2 |S|^v l^(v-1))`` and ``log(l |S|^v l^(v-1))``."""
    v = math.ceil(math.log2(l)) if l > 1 else 0
    base = v * math.log(s_size) + (v - 1) * math.log(l)
    return 2 * math.log(l) + base, math.log(l) + base


def admissibility(
    flavor: str,
    n=None,
    d: int = 2,
    l: int = 2,
    s_size: int = 1,
    m: int = 1,
    c: float = 1.0,
    log_n=None,
) -> AdmissibilityReport:
    """Evaluate the two dimension conditions and the probability floor.

    Bundle: ``log(2 m l |S|^v l^(v-1)) <= n^(1/(32d+160))`` (compared in
    log-log scale) and ``log(2 c l^2 |S|^v l^(v-1)) <= log(n)/(32d+160)``;
    floor ``1 - exp(-sqrt n)``.

    Cover: ``log(2 m l |S|^v l^(v-1)) <= sqrt(log n) log n`` and
    ``log(2 c l^2 |S|^v l^(v-1)) <= log(log n)/4``; floor ``1 - c/sqrt(n)``.
    """
    if flavor not in FLAVORS:
        raise ValueError(f"unknown flavor {flavor!r}")
    ln = _log_n(n, log_n)
    q2, q1 = _chain_logs(l, s_size)
    dim_log = math.log(2 * m) + q1
    rank_log = math.log(2 * c) + q2
    conds = []
    if flavor == "bundle":
        w = _width(d)
        lhs = math.log(dim_log) if dim_log > 0 else -math.inf
        conds.append(Condition("dimension", lhs, ln / w, "loglog", lhs <= ln / w))
        conds.append(Condition("size", rank_log, ln / w, "log", rank_log <= ln / w))
        sqrt_n = math.exp(ln / 2.0)
        floor = -math.expm1(-sqrt_n)
        log_fail = -sqrt_n
    else:
        rhs = math.sqrt(ln) * ln
        conds.append(Condition("dimension", dim_log, rhs, "log", dim_log <= rhs))
        rhs2 = 0.25 * math.log(ln)
        conds.append(Condition("size", rank_log, rhs2, "log", rank_log <= rhs2))
        log_fail = math.log(c) - ln / 2.0
        floor = 1.0 - math.exp(log_fail)
    return AdmissibilityReport(flavor, ln, d, l, s_size, m, c, conds, floor, log_fail)


# ---------------------------------------------------------------------------
# epsilon net and verdict


def net_size(s_min: float, s_size: int, c3: float) -> int:
    x = (1.0 - s_min) * 5.0 * s_size * c3
    return math.ceil(x - 1e-12) + 1


def epsilon_net(s_min: float, s_size: int, c3: float) -> np.ndarray:
    """Uniform points on [s_min, 1] with spacing at most ``1/(5 s_size c3)``."""
    if not s_min < 1 or s_size < 1 or c3 <= 0:
        raise ValueError("need s_min < 1, s_size >= 1, c3 > 0")
    return np.linspace(s_min, 1.0, net_size(s_min, s_size, c3))


def net_spacing(net: np.ndarray) -> float:
    return float(np.max(np.diff(net))) if len(net) > 1 else 0.0


def propagate_net_bound(sup_net: float, s_size: int, c3: float, spacing: float) -> float:
    """Bound on the whole interval: net supremum plus ``|S| c3 spacing``."""
    return sup_net + s_size * c3 * spacing


@dataclass(frozen=True)
class SlackLedger:
    """Exact arithmetic of the norm budget."""

    net: Fraction = NET_TARGET
    lipschitz: Fraction = LIPSCHITZ_BUDGET
    cusp: Fraction = CUSP_BOUND
    cap: Fraction = TOTAL_CAP

    @property
    def interior(self) -> Fraction:
        return self.net + self.lipschitz

    @property
    def total(self) -> Fraction:
        return self.interior + self.cusp

    def consistent(self) -> bool:
        return self.interior == INTERIOR_TARGET and self.total <= self.cap < 1

    def to_dict(self) -> dict:
        return {k: str(v) for k, v in
                {"net": self.net, "lipschitz": self.lipschitz, "interior": self.interior,
                 "cusp": self.cusp, "total": self.total, "cap": self.cap}.items()}


def neumann_verdict(norm_int, norm_cusp, schedule: RateSchedule | None = None) -> tuple[bool, str]:
    """Whether ``1 + L`` is invertible by a Neumann series (``norm_int + norm_cusp < 1``).

    Exact when given :class:`fractions.Fraction` inputs.
    """
    if norm_int < 0 or norm_cusp < 0:
        raise ValueError("norms must be nonnegative")
    total = norm_int + norm_cusp
    ok = total < 1
    if not ok:
        return False, f"no conclusion: norm sum {float(total):.6g} >= 1"
    if schedule is None:
        return True, f"Neumann series converges (norm sum {total})"
    return True, (
        f"Neumann series converges (norm sum {total}); "
        f"bottom of spectrum >= 1/4 - kappa = {schedule.gap_bound:.6g}"
    )


# ---------------------------------------------------------------------------
# end-to-end toy pipeline


class PipelineError(RuntimeError):
    """A pipeline stage failed; the message starts with the stage label."""


TOY_CAPS = {"n": 64, "support": 40, "grid": 1600}


@dataclass
class CertificateReport:
    schedule: dict
    config: dict
    constants: dict
    support: list
    net: list
    net_spacing: float
    rows: list
    sup_net: float
    lipschitz_term: float
    truncation_slack: float
    measured_norm_int: float
    norm_cusp_bound: float
    norm_cusp_computed: float
    verdict: bool
    gap_statement: str
    gap_lower_bound: float | None
    slack: dict
    checks: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["s", "norm_truncated", "total_rank", "max_truncation_error", "subspace_dim"])
        for r in self.rows:
            wr.writerow([f"{r['s']:.12g}", f"{r['norm']:.12g}", r["total_rank"],
                         f"{r['max_error']:.12g}", r["subspace_dim"]])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [
            "measured norms replace the probabilistic strong-convergence bound",
            f"flavor={self.config['flavor']} n={self.config['n']} T={self.config['T']} kappa={self.config['kappa']}",
            f"|S(T)|={len(self.support)} c3={self.constants['c3']:.6g} net={len(self.net)} spacing={self.net_spacing:.6g}",
            f"{'s':>10} {'norm':>12} {'rank':>6} {'trunc err':>12}",
        ]
        for r in self.rows:
            lines.append(f"{r['s']:>10.6f} {r['norm']:>12.6g} {r['total_rank']:>6d} {r['max_error']:>12.4g}")
        lines += [
            f"sup over net            {self.sup_net:.6g}",
            f"+ Lipschitz term        {self.lipschitz_term:.6g}",
            f"+ truncation slack      {self.truncation_slack:.6g}",
            f"= interior norm bound   {self.measured_norm_int:.6g}",
            f"cusp bound              {self.norm_cusp_bound:.6g} (computed {self.norm_cusp_computed:.6g})",
            f"verdict                 {self.verdict}: {self.gap_statement}",
        ]
        return "\n".join(lines) + "\n"


def _common_subspace(factors: list, tol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of the span of all kept singular vectors."""
    if not factors:
        return np.zeros((0, 0))
    stack = np.hstack(factors)
    if stack.shape[1] == 0:
        return np.zeros((stack.shape[0], 0))
    u, sv, _ = np.linalg.svd(stack, full_matrices=False)
    keep = sv > tol * max(sv[0], 1e-300)
    return u[:, keep]


def _net_point(shells, s, T, N, s_size, words, rep, zero_mean, tol):
    truncs = {}
    for g in words:
        mat = assemble_shell(shells[g], s, T, N)
        truncs[g] = svd_truncate(mat, s_size)
    factors = []
    for g in words:
        tr = truncs[g]
        if tr.rank:
            u, sv, vh = np.linalg.svd(tr.matrix)
            factors += [u[:, : tr.rank], vh[: tr.rank].T]
    basis = _common_subspace(factors)
    k = basis.shape[1]
    row = {
        "s": float(s),
        "total_rank": int(sum(t.rank for t in truncs.values())),
        "max_error": float(max(t.error for t in truncs.values())),
        "subspace_dim": int(k),
    }
    if k == 0:
        row["norm"] = 0.0
        return row, truncs, basis
    ent = {inv(g): basis.T @ truncs[g].matrix @ basis for g in words if truncs[g].rank}
    cm = CoefficientMap(k, ent, rep.d)
    op = assemble(hermitize(cm), rep, zero_mean=zero_mean)
    row["norm"] = spectral_norm(op, tol=tol)
    return row, truncs, basis


def end_to_end_toy(
    model: SurfaceModel | None = None,
    n: int = 8,
    flavor: str = "cover",
    T: float = 0.5,
    kappa: float = 0.2,
    grid_spec: GridSpec = GridSpec(10, 6, 2, 20),
    seed: int = 0,
    C_geo: float = 0.0,
    c3: float | None = None,
    tol: float = 1e-10,
) -> CertificateReport:
    """Run the whole pipeline at toy scale with measured norms.

    Stages: lattice set, discretized operators per net point, SVD
    truncation, restriction to the common subspace of kept singular
    vectors, hermitized assembly against a sampled representation, and the
    verdict. ``c3`` defaults to 1.2 times the largest measured deviation
    ratio between ``s_min`` and 1.

    Raises
    ------
    PipelineError
        With the stage name when a stage fails or a toy cap is exceeded.
    """
    model = model or SurfaceModel.punctured_torus()
    if flavor not in FLAVORS:
        raise PipelineError(f"config: unknown flavor {flavor!r}")
    if n > TOY_CAPS["n"] or grid_spec.size > TOY_CAPS["grid"]:
        raise PipelineError("config: toy caps exceeded (n <= 64, grid <= 1600 nodes)")
    if not 0 < kappa < 0.25:
        raise PipelineError("config: need 0 < kappa < 1/4 so that s_min < 1")
    try:
        lps = lattice_point_set(model, T, kappa, C_geo=C_geo)
    except Exception as err:  # noqa: BLE001
        raise PipelineError(f"lattice: {err}") from err
    if len(lps) > TOY_CAPS["support"]:
        raise PipelineError(f"lattice: |S(T)| = {len(lps)} exceeds {TOY_CAPS['support']}")
    words = list(lps.words)
    s_size = len(words)
    try:
        cutoffs = build_cutoffs(kappa)
        grid = grid_for(model, T, kappa, grid_spec, cutoffs)
        shells = {g: shell_geometry(model, g, T, grid, cutoffs) for g in words}
    except Exception as err:  # noqa: BLE001
        raise PipelineError(f"discretize: {err}") from err
    N = grid.size
    s_min = 0.5 + math.sqrt(kappa)
    if c3 is None:
        ratio = 0.0
        for g in words:
            diff = assemble_shell(shells[g], s_min, T, N) - assemble_shell(shells[g], 1.0, T, N)
            ratio = max(ratio, float(np.linalg.norm(diff, 2)) / (1.0 - s_min))
        c3 = max(1.2 * ratio, 1e-3)
    net = epsilon_net(s_min, s_size, c3)
    spacing = net_spacing(net)
    rep = reps.sample("permutation" if flavor == "cover" else "unitary", n, model.d, seed)
    zero_mean = flavor == "cover"
    rows = []
    first = None
    for s in net:
        try:
            row, truncs, _ = _net_point(shells, s, T, N, s_size, words, rep, zero_mean, tol)
        except Exception as err:  # noqa: BLE001
            raise PipelineError(f"assemble: {err}") from err
        rows.append(row)
        if first is None:
            first = (s, truncs)
    # full (untruncated) operator at the first net point, for the slack check
    s0, truncs0 = first
    full = {inv(g): assemble_shell(shells[g], s0, T, N) for g in words}
    full = {g: a for g, a in full.items() if np.any(a)}
    if full:
        full_norm = spectral_norm(
            assemble(hermitize(CoefficientMap(N, full, model.d)), rep, zero_mean=zero_mean), tol=tol
        )
    else:
        full_norm = 0.0
    sup_net = max(r["norm"] for r in rows)
    lip = s_size * c3 * spacing
    trunc_slack = float(sum(t.error for t in truncs0.values()))
    trunc_slack = max(trunc_slack, max(s_size * r["max_error"] for r in rows))
    norm_int = propagate_net_bound(sup_net, s_size, c3, spacing) + trunc_slack
    verdict, statement = neumann_verdict(norm_int, float(CUSP_BOUND))
    sched = {"kappa": kappa, "T": T, "s_min": s_min, "gap_bound": 0.25 - kappa}
    checks = {
        "full_norm_first_point": full_norm,
        "truncated_norm_first_point": rows[0]["norm"],
        "assembly_slack": abs(full_norm - rows[0]["norm"]),
        "assembly_slack_budget": float(TRUNCATION_SLACK),
        "spacing_ok": spacing <= 1.0 / (5.0 * s_size * c3) + 1e-15,
        "chain_dimension_bound_l2": chain_dimension_bound(2, s_size),
    }
    return CertificateReport(
        schedule=sched,
        config={"flavor": flavor, "n": n, "T": T, "kappa": kappa, "seed": seed, "C_geo": C_geo,
                "grid": asdict(grid_spec), "model": model.name},
        constants={"c3": c3, "cusp_constant": 1.0},
        support=[list(g) for g in words],
        net=[float(s) for s in net],
        net_spacing=spacing,
        rows=rows,
        sup_net=sup_net,
        lipschitz_term=lip,
        truncation_slack=trunc_slack,
        measured_norm_int=norm_int,
        norm_cusp_bound=float(CUSP_BOUND),
        norm_cusp_computed=cusp_norm_bound(cutoffs),
        verdict=verdict,
        gap_statement=statement,
        gap_lower_bound=(0.25 - kappa) if verdict else None,
        slack=SlackLedger().to_dict(),
        checks=checks,
    )
