"""Batch experiment driver.

Each subcommand reads an optional JSON config, runs a seeded experiment,
and writes ``<out>/<subcommand>/results.csv`` plus ``manifest.json``. The
CSV starts with a comment line carrying the config hash and seed list.
The exit status is 0 exactly when every in-run assertion passes.

CSV columns per subcommand
--------------------------
norm-ratio        seed, n, flavor, norm, R, lower_bound, ratio, transitive
linearize-verify  case, seed, l, s_size, m, flavor, n, theta, norm_p, norm_q, residual, off_block
kernel-check      check, s, T, value, bound, ok
lattice-grow      T, size, max_word_length, explored, size_doubled_slack, stable
                  (slack is one and two generator displacements)
rate-table        flavor, d, log10_n, T, kappa, s_min, gap_bound
certify-toy       seed, s, norm_truncated, total_rank, max_truncation_error, subspace_dim
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy

from . import __version__
from . import certificate as cert
from . import linearization as lin
from . import parametrix as par
from . import representations as reps
from .hyperbolic import SurfaceModel, lattice_point_set
from .operator_lab import CoefficientMap, assemble, regular_norm_lower, spectral_norm

DEFAULTS = {
    "norm-ratio": {
        "flavor": "permutation", "n_grid": [50, 100, 200], "d": 2,
        "seeds": list(range(10)), "regular_R": 8,
    },
    "linearize-verify": {
        "cases": 100, "d": 2, "l_values": [2, 3, 4], "s_max": 6, "m_max": 3,
        "n_max": 8, "seeds": [0],
    },
    "kernel-check": {
        "s_grid": [0.6, 0.8, 1.0], "T_grid": [5.0, 10.0, 15.0], "radii": [0.5, 1.0, 2.0],
        "pairing_T": [8.0, 10.0, 15.0], "C_max": 10.0, "seeds": [0],
    },
    "lattice-grow": {
        "T_grid": [2.0, 3.0, 4.0, 5.0], "kappa": 0.9, "C_geo": 0.0,
        "slope_range": [1.6, 2.4], "seeds": [0],
    },
    "rate-table": {
        "flavors": ["bundle", "cover"], "n_grid": [10**3, 10**6, 10**9], "d": 2, "seeds": [0],
    },
    "certify-toy": {
        "flavor": "cover", "n": 8, "T": 0.5, "kappa": 0.2, "C_geo": 0.0,
        "grid_spec": [10, 6, 2, 20], "c3": None, "seeds": [0],
    },
}
SUBCOMMANDS = tuple(DEFAULTS)
CAPS = {"n": 4096, "cases": 10000, "l": 8, "s_max": 12, "m_max": 8, "n_max": 64}


class ConfigError(ValueError):
    pass


def resolve_config(sub: str, raw: dict | None, seed: int | None = None) -> dict:
    """Merge ``raw`` into the defaults of ``sub`` and validate."""
    cfg = json.loads(json.dumps(DEFAULTS[sub]))
    raw = dict(raw or {})
    raw.pop("subcommand", None)
    unknown = set(raw) - set(cfg)
    if unknown:
        raise ConfigError(f"unknown keys for {sub}: {sorted(unknown)}")
    cfg.update(raw)
    if seed is not None:
        cfg["seeds"] = [int(seed)]
    if not cfg["seeds"]:
        raise ConfigError("seeds must be non-empty")
    if any(int(s) < 0 or int(s) >= 2**64 for s in cfg["seeds"]):
        raise ConfigError("seeds must be unsigned 64-bit integers")
    if sub == "norm-ratio" and max(cfg["n_grid"]) > CAPS["n"]:
        raise ConfigError(f"n_grid exceeds cap {CAPS['n']}")
    if sub == "linearize-verify":
        if cfg["cases"] > CAPS["cases"] or max(cfg["l_values"]) > CAPS["l"]:
            raise ConfigError("cases or l exceed caps")
        if cfg["s_max"] > CAPS["s_max"] or cfg["m_max"] > CAPS["m_max"] or cfg["n_max"] > CAPS["n_max"]:
            raise ConfigError("s_max, m_max or n_max exceed caps")
    if sub == "certify-toy":
        if cfg["n"] > cert.TOY_CAPS["n"]:
            raise ConfigError("n exceeds toy cap 64")
        if par.GridSpec(*cfg["grid_spec"]).size > cert.TOY_CAPS["grid"]:
            raise ConfigError("grid exceeds toy cap 1600")
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _pmap(fn, items, threads: int) -> list:
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# experiments: each returns (columns, rows, assertions, extra)


def run_norm_ratio(cfg, threads):
    d, flavor, R = cfg["d"], cfg["flavor"], cfg["regular_R"]
    if flavor not in reps.FLAVORS:
        raise ConfigError(f"unknown flavor {flavor!r}")
    zero_mean = flavor == "permutation"
    cm = CoefficientMap.generator_sum(d)
    lower = regular_norm_lower(cm, R, d=d)
    trials = [(n, s) for n in cfg["n_grid"] for s in cfg["seeds"]]

    def one(t):
        n, s = t
        rep = reps.sample(flavor, n, d, int(s))
        norm = spectral_norm(assemble(cm, rep, zero_mean=zero_mean))
        trans = reps.is_transitive(rep) if zero_mean else ""
        return [s, n, flavor, norm, R, lower, norm / lower, trans]

    rows = _pmap(one, trials, threads)
    target = 2.0 * math.sqrt(2 * d - 1)
    asserts = {
        "norms_at_most_2d": all(r[3] <= 2 * d + 1e-9 for r in rows),
        "regular_lower_below_target": lower <= target + 1e-9,
    }
    medians = {str(n): float(np.median([r[3] for r in rows if r[1] == n])) for n in cfg["n_grid"]}
    cols = ["seed", "n", "flavor", "norm", "R", "lower_bound", "ratio", "transitive"]
    return cols, rows, asserts, {"target": target, "medians": medians}


def run_linearize_verify(cfg, threads):
    d = cfg["d"]
    trials = [(base, i) for base in cfg["seeds"] for i in range(cfg["cases"])]

    def one(t):
        base, i = t
        seed = reps.trial_seed(int(base), i)
        rng = reps.make_rng(seed)
        l = int(rng.choice(cfg["l_values"]))
        m = int(rng.integers(1, cfg["m_max"] + 1))
        cm = lin.random_instance(rng, d, l, cfg["s_max"], m)
        flavor = "unitary" if i % 2 == 0 else "permutation"
        n = int(rng.integers(2, cfg["n_max"] + 1))
        rep = reps.sample(flavor, n, d, seed)
        zm = flavor == "permutation"
        hs = lin.half_step(cm, l)
        p = assemble(cm, rep, zero_mean=zm, dense_cap=10**9).to_dense()
        q = assemble(hs.output_map, rep, zero_mean=zm, dense_cap=10**9).to_dense()
        norm_p, norm_q = spectral_norm(p, tol=1e-12), spectral_norm(q, tol=1e-12)
        off, _ = lin.block_structure_defect(hs, rep, zm)
        res = abs(norm_q**2 - hs.theta - norm_p)
        return [i, seed, l, len(cm.support), cm.m, flavor, n, hs.theta, norm_p, norm_q, res, off]

    rows = _pmap(one, trials, threads)
    max_res = max(r[10] for r in rows)
    max_off = max(r[11] for r in rows)
    asserts = {"max_residual_le_1e-7": max_res <= 1e-7, "max_off_block_le_1e-9": max_off <= 1e-9}
    cols = ["case", "seed", "l", "s_size", "m", "flavor", "n", "theta", "norm_p", "norm_q",
            "residual", "off_block"]
    return cols, rows, asserts, {"max_residual": max_res, "max_off_block": max_off}


def run_kernel_check(cfg, threads):
    rows = []
    for r in cfg["radii"]:
        val = float(par.resolvent_kernel(1.0, r))
        ref = float(par.resolvent_s1_closed_form(r))
        rows.append(["resolvent_s1", 1.0, "", val, ref, abs(val - ref) <= 1e-8])
    C = par.remainder_constant(cfg["T_grid"], cfg["s_grid"])
    rows.append(["remainder_constant", "", "", C, cfg["C_max"], C <= cfg["C_max"]])
    fits = _pmap(lambda s: (s, par.fit_envelope(s, cfg["T_grid"])), cfg["s_grid"], threads)
    for s, fit in fits:
        for T, rel in zip(cfg["T_grid"], fit["relative"]):
            rows.append(["envelope_relative", s, T, rel, 0.2, abs(rel - 1.0) <= 0.2])
    for T in cfg["pairing_T"]:
        v = par.envelope_admissibility(T)
        rows.append(["pairing", "", T, v, 0.2, v < 0.2])
    asserts = {f"{r[0]}_{i}": bool(r[5]) for i, r in enumerate(rows)}
    extra = {"envelope_C": {str(s): f["C"] for s, f in fits}}
    return ["check", "s", "T", "value", "bound", "ok"], rows, asserts, extra


def run_lattice_grow(cfg, threads):
    model = SurfaceModel.punctured_torus()
    kappa, C = cfg["kappa"], cfg["C_geo"]
    slack = float(model.generator_displacements().max())

    def one(T):
        a = lattice_point_set(model, T, kappa, C_geo=C, prune_slack=slack)
        b = lattice_point_set(model, T, kappa, C_geo=C, prune_slack=2 * slack)
        return [T, len(a), max(len(w) for w in a.words), a.explored, len(b), a.as_set() == b.as_set()]

    rows = _pmap(one, cfg["T_grid"], threads)
    Ts = np.array([r[0] for r in rows], dtype=float)
    slope = float(np.polyfit(Ts, np.log([r[1] for r in rows]), 1)[0])
    lo, hi = cfg["slope_range"]
    asserts = {"slope_in_range": lo <= slope <= hi, "stable_under_slack": all(r[5] for r in rows)}
    cols = ["T", "size", "max_word_length", "explored", "size_doubled_slack", "stable"]
    return cols, rows, asserts, {"slope": slope}


def run_rate_table(cfg, threads):
    rows, ok = [], True
    for flavor in cfg["flavors"]:
        for n in cfg["n_grid"]:
            sch = cert.rate_schedule(flavor, int(n), cfg["d"])
            ok &= sch.gap_identity_residual() <= 1e-12 * max(1.0, sch.kappa)
            rows.append([flavor, cfg["d"], sch.log10_n, sch.T, sch.kappa, sch.s_min, sch.gap_bound])
    extra = {
        "crossing": {f: cert.crossing_point(f, cfg["d"]) for f in cfg["flavors"]},
        "turning": {f: cert.turning_point(f) for f in cfg["flavors"]},
    }
    cols = ["flavor", "d", "log10_n", "T", "kappa", "s_min", "gap_bound"]
    return cols, rows, {"gap_identity": bool(ok)}, extra


def run_certify_toy(cfg, threads):
    spec = par.GridSpec(*cfg["grid_spec"])

    def one(seed):
        return cert.end_to_end_toy(
            n=cfg["n"], flavor=cfg["flavor"], T=cfg["T"], kappa=cfg["kappa"],
            grid_spec=spec, seed=int(seed), C_geo=cfg["C_geo"], c3=cfg["c3"],
        )

    reports = _pmap(one, cfg["seeds"], threads)
    rows = []
    for seed, rep in zip(cfg["seeds"], reports):
        for r in rep.rows:
            rows.append([seed, r["s"], r["norm"], r["total_rank"], r["max_error"], r["subspace_dim"]])
    s_size = len(reports[0].support)
    asserts = {
        "assembly_slack_le_1_20": all(r.checks["assembly_slack"] <= 0.05 for r in reports),
        "truncation_errors_le_target": all(
            row["max_error"] <= 1.0 / (20 * s_size) + 1e-15 for r in reports for row in r.rows
        ),
        "net_spacing": all(r.checks["spacing_ok"] for r in reports),
    }
    extra = {"reports": [json.loads(r.to_json()) for r in reports]}
    cols = ["seed", "s", "norm_truncated", "total_rank", "max_truncation_error", "subspace_dim"]
    return cols, rows, asserts, extra


RUNNERS = {
    "norm-ratio": run_norm_ratio,
    "linearize-verify": run_linearize_verify,
    "kernel-check": run_kernel_check,
    "lattice-grow": run_lattice_grow,
    "rate-table": run_rate_table,
    "certify-toy": run_certify_toy,
}


def render_csv(sub: str, cfg: dict, cols: list, rows: list) -> str:
    buf = io.StringIO()
    buf.write(f"# covergap {sub} config_hash={config_hash(cfg)} seeds={json.dumps(cfg['seeds'])}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(cols)
    for r in rows:
        wr.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def run(sub: str, cfg: dict, out: str, threads: int = 1) -> int:
    """Run one subcommand with a resolved config; returns the exit status."""
    t0 = time.perf_counter()
    cols, rows, asserts, extra = RUNNERS[sub](cfg, threads)
    wall = time.perf_counter() - t0
    target = os.path.join(out, sub)
    os.makedirs(target, exist_ok=True)
    with open(os.path.join(target, "results.csv"), "w", encoding="utf-8") as fh:
        fh.write(render_csv(sub, cfg, cols, rows))
    manifest = {
        "subcommand": sub,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "seeds": cfg["seeds"],
        "columns": cols,
        "versions": {"covergap": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "wall_time_s": wall,
        "assertions": {k: bool(v) for k, v in asserts.items()},
        "passed": all(asserts.values()),
        "extra": extra,
    }
    with open(os.path.join(target, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True, default=_fmt)
    failed = [k for k, v in asserts.items() if not v]
    for k in failed:
        print(f"assert: {sub}: {k} failed", file=sys.stderr)
    return 0 if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="covergap", description="Seeded experiment driver.")
    p.add_argument("--subcommand", required=True, choices=SUBCOMMANDS)
    p.add_argument("--config", help="JSON config file (keys override the subcommand defaults)")
    p.add_argument("--seed", type=int, help="replace the seed list by this single seed")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--threads", type=int, default=1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = None
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        cfg = resolve_config(args.subcommand, raw, args.seed)
    except (OSError, json.JSONDecodeError, ConfigError, TypeError, ValueError) as err:
        print(f"config: {err}", file=sys.stderr)
        return 2
    try:
        return run(args.subcommand, cfg, args.out, max(1, args.threads))
    except (ConfigError, cert.PipelineError) as err:
        print(f"{args.subcommand}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
