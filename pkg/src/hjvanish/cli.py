"""Command-line runner: one subcommand per experiment pipeline.

Exit codes: 0 success, 2 invalid config or input, 3 solver failure,
4 finite-difference and LP expansion estimates disagree, 5 the divergence
certificate falls short of its threshold.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import (
    DEFAULT_LAMBDAS,
    c_curve,
    expansion_slopes,
    family_solves,
    first_family_limit,
    second_family_limit,
)
from .config import COMMANDS, ExperimentConfig, ladder, load_config, rate
from .counterexample import build_potential, divergence_experiment
from .domains import check_a1, scale
from .ergodic import DEFAULT_DELTAS, eigenvalue, eigenvalue_closed_form
from .errors import SolverError, ValidationError
from .hamiltonians import eikonal, potential_from_id
from .hj_solver import FailedSolve, solve_discounted, solve_state_constraint_family
from .mather_lp import build_lp, expansion_bounds, solve_mather, write_lp
from .report_io import ExperimentReport, write_csv, write_report, write_svg_profile

log = logging.getLogger("hjvanish")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_DISAGREE, EXIT_NO_DIVERGENCE = 0, 2, 3, 4, 5


def _report(cmd: str, cfg: ExperimentConfig, result, out: Path, t0: float, **meta) -> Path:
    rep = ExperimentReport(cmd, cfg.raw, result, meta, wall_time=time.perf_counter() - t0)
    return write_report(rep, out / f"{cmd}.json")


def cmd_solve(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    t0 = time.perf_counter()
    sec = cfg.section("solve")
    H, dom = cfg.hamiltonian, cfg.domain
    if "lambdas" in sec:
        lams = ladder(sec["lambdas"], "solve.lambdas")
        phi, r = rate(sec.get("phi", {}), "solve.phi"), rate(sec.get("rate", {"kind": "zero"}), "solve.rate")
        sols = solve_state_constraint_family(H, dom, phi, r, lams, cfg.solver, threads=threads)
        rows, summary = [], []
        for s in sols:
            if isinstance(s, FailedSolve):
                summary.append({**s.meta, "error": s.error})
                continue
            summary.append({**s.meta, "sweep_cycles": s.iterations, "u_min": float(s.values.min()),
                            "u_max": float(s.values.max())})
            rows.extend((s.meta["lambda"], s.meta["r"], s.meta["phi"], x, u) for x, u in zip(s.grid.x, s.values))
        write_csv(["lambda", "r", "phi", "x", "u"], rows, out / "solve.csv")
        _report("solve", cfg, {"solves": summary}, out, t0)
        if all("error" in s for s in summary):
            raise SolverError("every solve in the family failed")
        return EXIT_OK
    delta = float(sec.get("delta", 0.1))
    sdom = scale(dom, float(sec.get("r", 0.0)))
    u = solve_discounted(H, sdom, delta, cfg.solver)
    if H.dim == 1:
        write_csv(["x", "u"], zip(u.grid.x, u.values), out / "solve.csv")
    else:
        write_csv(["x", "y", "u"], ((a, b, v) for (a, b), v in zip(u.grid.nodes, u.values)), out / "solve.csv")
    origin = float(u(np.zeros((1, H.dim)) if H.dim == 2 else np.zeros(1))[0])
    _report("solve", cfg, u, out, t0, u_at_origin=origin)
    log.info("u(0) = %.10g after %d sweep cycles", origin, u.iterations)
    return EXIT_OK


def cmd_eigenvalue(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    t0 = time.perf_counter()
    sec = cfg.section("eigenvalue")
    sdom = scale(cfg.domain, float(sec.get("r", 0.0)))
    deltas = ladder(sec.get("deltas", list(DEFAULT_DELTAS)), "eigenvalue.deltas")
    x_ref = sec.get("x_ref", [0.0] * cfg.domain.dim)
    res = eigenvalue(cfg.hamiltonian, sdom, deltas, x_ref, cfg.solver, int(sec.get("degree", 2)))
    meta = {}
    if cfg.hamiltonian.is_eikonal_type:
        meta["c_closed_form"] = eigenvalue_closed_form(cfg.hamiltonian, sdom)
    write_csv(["delta", "minus_delta_u"], res.table(), out / "eigenvalue.csv")
    _report("eigenvalue", cfg, res, out, t0, **meta)
    log.info("c = %.10g", res.c)
    return EXIT_OK


def cmd_mather(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    t0 = time.perf_counter()
    sec = cfg.section("mather")
    lp = build_lp(cfg.hamiltonian, cfg.domain, velocities=int(sec.get("velocities", 21)), K=int(sec.get("K", 12)),
                  nodes=int(sec.get("nodes", 101)))
    if "dump_lp" in sec:
        write_lp(lp, out / str(sec["dump_lp"]))
    value, mu = solve_mather(lp)
    meta = {"columns": lp.columns, "dropped_columns": lp.dropped, "tests": lp.K}
    if sec.get("stage2", True):
        b = expansion_bounds(lp)
        meta.update(c1_minus=b.c1_minus, c1_plus=b.c1_plus, eps_pin=b.eps_pin)
    write_csv(["x", "v", "weight"], ((x[0], v[0], w) for x, v, w in mu.support()) if lp.grid.dim == 1
              else ((str(x), str(v), w) for x, v, w in mu.support()), out / "mather.csv")
    _report("mather", cfg, mu, out, t0, **meta)
    log.info("LP value %.10g", value)
    return EXIT_OK


def cmd_expansion(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    t0 = time.perf_counter()
    sec = cfg.section("expansion")
    rep = expansion_slopes(
        cfg.hamiltonian,
        cfg.domain,
        rate(sec["rate"], "expansion.rate"),
        ladder(sec.get("lambdas", list(DEFAULT_LAMBDAS)), "expansion.lambdas"),
        cfg.solver,
        lp_check=bool(sec.get("lp", True)),
        lp_nodes=int(sec.get("lp_nodes", 101)),
        lp_velocities=int(sec.get("lp_velocities", 21)),
        lp_K=int(sec.get("lp_K", 12)),
        tol=float(sec.get("tol", 2e-2)),
        two_sided=bool(sec.get("two_sided", False)),
    )
    write_csv(["lambda", "r", "c_of_lambda", "slope"], rep.slope_table(), out / "expansion.csv")
    _report("expansion", cfg, rep, out, t0)
    log.info("verdict %s, c1- %.6g, c1+ %.6g", rep.verdict, rep.c1_minus, rep.c1_plus)
    if rep.lp_agrees is False:
        print("finite-difference slopes and LP bounds disagree", file=sys.stderr)
        return EXIT_DISAGREE
    return EXIT_OK


def cmd_family(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    t0 = time.perf_counter()
    sec = cfg.section("family")
    phi = rate(sec.get("phi", {}), "family.phi")
    r = rate(sec.get("rate", {"kind": "zero"}), "family.rate")
    lams = ladder(sec.get("lambdas", list(DEFAULT_LAMBDAS)), "family.lambdas")
    which = sec.get("which", "both")
    fs = family_solves(cfg.hamiltonian, cfg.domain, phi, r, lams, cfg.solver, threads)
    results = {}
    if which in ("first", "both"):
        results["first"] = first_family_limit(cfg.hamiltonian, cfg.domain, (phi, r), solves=fs)
    if which in ("second", "both"):
        results["second"] = second_family_limit(
            cfg.hamiltonian, cfg.domain, (phi, r), solves=fs, groups=sec.get("groups"),
            cluster_tol=float(sec.get("cluster_tol", 2e-2)),
        )
    x = fs.base_grid.x if fs.base_grid.dim == 1 else np.arange(fs.base_grid.size)
    cols, data = ["x"], [x]
    for name, res in results.items():
        _report(f"family_{name}", cfg, res, out, t0)
        if res.limit is not None:
            cols.append(f"{name}_limit")
            data.append(res.limit)
        for k, lam in enumerate(res.lambdas):
            cols.append(f"{name}_lambda_{lam:.6g}")
            data.append(res.profiles[k])
    write_csv(cols, zip(*data), out / "family.csv")
    if fs.base_grid.dim == 1:
        plots = {f"{n} limit": res.limit for n, res in results.items() if res.limit is not None}
        if plots:
            write_svg_profile(x, plots, out / "family.svg", title="family limits")
    for name, res in results.items():
        log.info("%s family: %s", name, res.verdict)
    return EXIT_OK


def cmd_ccurve(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    t0 = time.perf_counter()
    sec = cfg.section("ccurve")
    if "lambdas" in sec:
        lams = [float(v) for v in sec["lambdas"]]
    else:
        lams = np.linspace(float(sec.get("start", -0.1)), float(sec.get("stop", 0.1)), int(sec["num"])).tolist()
    cc = c_curve(cfg.hamiltonian, cfg.domain, lams, cfg.solver, kink_tol=float(sec.get("kink_tol", 1e-2)))
    write_csv(["lambda", "c_of_lambda", "left_quotient", "right_quotient"], cc.table(), out / "ccurve.csv")
    _report("ccurve", cfg, cc, out, t0)
    return EXIT_OK


def cmd_counterexample(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    t0 = time.perf_counter()
    sec = cfg.section("counterexample")
    K = int(sec.get("K", 4))
    control = sec.get("control")
    pot = potential_from_id(str(control)) if control is not None else None
    tau = (float(sec.get("tau_min", 1e-8)), float(sec.get("tau_max", 1e-1)))
    cert = divergence_experiment(K, cfg.solver, potential=pot, tau_range=tau, tol=float(sec.get("tol", 2e-2)))
    if pot is None:
        saw = build_potential(K)
        write_csv(["x", "V"], zip(saw.xs, saw.values), out / "potential.csv")
    write_csv(["k", "r", "z", "c_of_lambda", "tau", "phi", "r_over_phi", "modulus_error"], cert.table,
              out / "schedule.csv")
    write_csv(
        ["x", "limit_odd", "limit_even", "reference_odd", "reference_even"],
        zip(cert.base_x, cert.limit_odd, cert.limit_even, cert.reference_odd, cert.reference_even),
        out / "profiles.csv",
    )
    write_svg_profile(cert.base_x, {"odd k": cert.limit_odd, "even k": cert.limit_even}, out / "profiles.svg",
                      title=f"subsequence limits, K = {K}")
    _report("counterexample", cfg, cert, out, t0)
    log.info("gap %.6g vs threshold %.6g", cert.gap, cert.threshold)
    return EXIT_OK if cert.diverges else EXIT_NO_DIVERGENCE


def cmd_checkdomain(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    t0 = time.perf_counter()
    sec = cfg.section("checkdomain")
    rs = sec.get("r_samples")
    kappa = check_a1(cfg.domain, rs)
    res = {"kind": cfg.domain.kind, "dim": cfg.domain.dim, "kappa": kappa, "a1_holds": kappa > 0,
           "min_rho": cfg.domain.min_rho, "max_rho": cfg.domain.max_rho}
    _report("checkdomain", cfg, res, out, t0)
    log.info("kappa = %.6g", kappa)
    return EXIT_OK


_HANDLERS = {
    "solve": cmd_solve,
    "eigenvalue": cmd_eigenvalue,
    "mather": cmd_mather,
    "expansion": cmd_expansion,
    "family": cmd_family,
    "ccurve": cmd_ccurve,
    "counterexample": cmd_counterexample,
    "checkdomain": cmd_checkdomain,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hjvanish", description="Vanishing-discount experiments on scaled domains.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, type=Path)
        s.add_argument("--out", type=Path, default=Path("out"))
        s.add_argument("--threads", type=int, default=1, help="0 = one per CPU")
        s.add_argument("--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    if not args.verbose:
        warnings.simplefilter("ignore", RuntimeWarning)
    if args.threads < 0:
        print("error: --threads must be >= 0", file=sys.stderr)
        return EXIT_INVALID
    threads = args.threads or os.cpu_count() or 1
    try:
        cfg = load_config(args.config, args.command)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        return _HANDLERS[args.command](cfg, args.out, threads)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
