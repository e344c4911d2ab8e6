"""One check per acceptance criterion; each prints a single PASS/FAIL line."""

import math
import tempfile
import time
from pathlib import Path

import numpy as np

from conftest import E1, report_criterion
from hjvanish.asymptotics import (
    DEFAULT_LAMBDAS,
    Rate,
    c_curve,
    discount_rate_slope,
    expansion_slopes,
    family_solves,
    first_family_limit,
    second_family_limit,
)
from hjvanish.counterexample import build_potential, divergence_experiment
from hjvanish.domains import interval, scale
from hjvanish.ergodic import eigenvalue, maximal_subsolution
from hjvanish.hamiltonians import eikonal, potential_from_id, quadratic, tilted
from hjvanish.hj_solver import SolveConfig, lipschitz_constant, solve_state_constraint_family
from hjvanish.mather_lp import build_lp, expansion_bounds, solve_mather
from hjvanish.simplex import simplex
from test_cli import CONFIGS, GOLDEN, data_files, run
from test_mather_lp import toy_grid
from test_simplex import vertex_enumeration

LAM = Rate("power", 1.0, 1.0)
CFG = SolveConfig(nodes=2001)
OMEGA = interval(1.0)
LADDER = (0.1, 0.05, 0.025, 0.0125, 0.00625)


def test_criterion_01_eigenvalue_accuracy():
    out = []
    for H, ref in ((eikonal("exp_abs"), -E1), (tilted(1.0), 1.0)):
        t0 = time.perf_counter()
        c = eigenvalue(H, OMEGA, LADDER, 0.0, CFG).c
        out.append((abs(c - ref), time.perf_counter() - t0))
    ok = all(err <= 1e-3 and dt < 60 for err, dt in out)
    detail = ", ".join(f"err {e:.2e} in {t:.2f}s" for e, t in out)
    assert report_criterion(1, ok, f"eigenvalue exp(-|x|) / tilted: {detail}")


def test_criterion_02_discount_rate():
    slope, _ = discount_rate_slope(eikonal("exp_abs"), OMEGA, LADDER, CFG, c0=-E1)
    assert report_criterion(2, slope >= 0.9, f"log-log slope of sup|delta u + c(0)| = {slope:.4f} (need >= 0.9)")


def test_criterion_03_vanishing_discount_limit():
    H = eikonal("exp_abs")
    res = first_family_limit(H, OMEGA, (LAM, Rate("zero")), cfg=CFG)
    ends = res(np.array([[-1.0], [1.0]]))
    x = res.base_grid.x
    ref = np.minimum(maximal_subsolution(H, OMEGA, 1.0, -E1, cfg=CFG)(x), maximal_subsolution(H, OMEGA, -1.0, -E1, cfg=CFG)(x))
    dist = float(np.max(np.abs(res.limit - ref)))
    end = float(np.max(np.abs(ends)))
    ok = end <= 1e-2 and dist <= 2e-2
    assert report_criterion(3, ok, f"|u0(+-1)| = {end:.2e}, sup|u0 - min S| = {dist:.2e}")


def test_criterion_04_gamma_family_structure():
    H = eikonal("exp_abs")
    lim = {}
    for g in (-1.0, 0.0, 1.0):
        r = Rate("power", g, 1.0) if g else Rate("zero")
        lim[g] = first_family_limit(H, OMEGA, (LAM, r), cfg=CFG).limit
    ident = float(np.max(np.abs(lim[1.0] + lim[-1.0] - 2 * lim[0.0])))
    order = max(float(np.max(lim[1.0] - lim[0.0])), float(np.max(lim[0.0] - lim[-1.0])), 0.0)
    ok = ident <= 1e-2 and order <= 1e-3
    assert report_criterion(4, ok, f"sup|u+ + u- - 2u0| = {ident:.2e}, ordering excess = {order:.2e}")


def test_criterion_05_expansion_slopes():
    H_EXPABS, Hsq = eikonal("exp_abs"), eikonal("square")
    rep_exp = expansion_slopes(H_EXPABS, OMEGA, LAM, cfg=CFG, two_sided=True)
    repsq = expansion_slopes(Hsq, OMEGA, LAM, cfg=CFG, two_sided=True)
    e_exp = max(abs(rep_exp.c1_minus - E1), abs(rep_exp.c1_plus - E1), abs(rep_exp.lp.c1_minus - E1), abs(rep_exp.lp.c1_plus - E1))
    esq = max(abs(repsq.c1_minus), abs(repsq.c1_plus), abs(repsq.lp.c1_minus), abs(repsq.lp.c1_plus))
    shipped = [eikonal("exp_abs"), eikonal("square"), eikonal("sqrt_edge"), tilted(1.0), quadratic("square")]
    lows = [expansion_bounds(build_lp(H, OMEGA, velocities=21, K=12, nodes=101)).c1_minus for H in shipped]
    ok = e_exp <= 2e-2 and esq <= 1e-6 and min(lows) >= -1e-8
    assert report_criterion(
        5, ok, f"exp(-|x|) max err {e_exp:.2e}, V=x^2 max |c1| {esq:.1e}, min LP lower bound {min(lows):.2e}"
    )


def test_criterion_06_second_normalization():
    H = tilted(1.0)
    x = np.array([-0.5, 0.0, 0.5])
    worst, first_div = 0.0, None
    for m in (0.5, 1.0, 2.0):
        rates = (LAM, Rate("power", 1.0, m))
        fs = family_solves(H, OMEGA, *rates, cfg=CFG)
        sec = second_family_limit(H, OMEGA, rates, solves=fs)
        worst = max(worst, float(np.max(np.abs(sec(x) - (1 - x) ** 2 / 2))))
        if m == 0.5:
            first = first_family_limit(H, OMEGA, rates, solves=fs)
            first_div = first.verdict == "diverges" and first.sup_norms[-1] >= 4 * first.sup_norms[0]
            growth = first.sup_norms[-1] / first.sup_norms[0]
    ok = worst <= 1e-2 and first_div
    assert report_criterion(6, ok, f"max profile err {worst:.2e}; first family (m=0.5) sup growth x{growth:.1f}")


def test_criterion_07_lp_vs_pde():
    errs, resid = [], 0.0
    for H, c0 in ((tilted(1.0), 1.0), (eikonal("exp_abs"), -E1), (eikonal("square"), 0.0)):
        value, mu = solve_mather(build_lp(H, OMEGA, velocities=21, K=12, nodes=101))
        errs.append(abs(value + c0))
        resid = max(resid, float(np.max(np.abs(mu.holonomy_residual))))
    toy_ok = True
    for name in ("square", "exp_abs", "sqrt_edge", "plateau"):
        lp = build_lp(eikonal(name), OMEGA, grid=toy_grid(3), velocities=3, K=2)
        best, _ = vertex_enumeration(lp.cost, lp.A_eq, lp.b_eq)
        toy_ok &= abs(simplex(lp.cost, lp.A_eq, lp.b_eq).value - best) <= 1e-12
    ok = max(errs) <= 5e-3 and resid <= 1e-9 and toy_ok
    assert report_criterion(7, ok, f"max |LP + c(0)| = {max(errs):.2e}, holonomy residual {resid:.1e}, toy LPs exact: {toy_ok}")


def test_criterion_08_counterexample():
    V = build_potential(4)
    exact = float(np.sum(np.diff(V.xs) * (V.values[1:] + V.values[:-1]) / 2))
    cert = divergence_experiment(4)
    ctl = divergence_experiment(4, potential=potential_from_id("square"))
    ratios = all(row[6] >= 10 * 4.0 ** (row[0] - 1) for row in cert.table)
    ok = cert.gap >= exact - 2e-2 and ctl.gap <= 2e-2 and ratios
    assert report_criterion(
        8, ok, f"gap {cert.gap:.5f} vs ||V||_L1 - 0.02 = {exact - 2e-2:.5f}; control gap {ctl.gap:.1e}; r/phi ratios ok: {ratios}"
    )


def test_criterion_09_divergent_slopes():
    lams = [1e-2, 1e-3, 1e-4]
    rep = expansion_slopes(eikonal("sqrt_edge"), OMEGA, Rate("power", -1.0, 1.0), lams, CFG)
    rel = [abs(abs(s) / l**-0.5 - 1) for s, l in zip(rep.slopes, lams) if l in (1e-2, 1e-4)]
    ok = rep.verdict == "diverges" and max(rel) <= 5e-2
    assert report_criterion(9, ok, f"verdict {rep.verdict}, max rel err of |slope| vs lambda^-1/2 = {max(rel):.2e}")


def _triangle_violation(rng):
    H = quadratic("square")
    cfg = SolveConfig(nodes=121)
    sd = scale(OMEGA, 0.0)
    grid = cfg.grid_for(sd)
    S = {}

    def dist(src):
        if src not in S:
            S[src] = maximal_subsolution(H, sd, grid.nodes[src], 1.0, grid=grid, cfg=cfg).values
        return S[src]

    worst = -math.inf
    for i, j, k in rng.integers(0, grid.size, size=(1000, 3)):
        worst = max(worst, dist(k)[i] - dist(j)[i] - dist(k)[j])
    return worst, 2 * grid.spacing


def _a_priori_excess():
    excess = -math.inf
    cfg = SolveConfig(nodes=801)
    for H in (eikonal("exp_abs"), eikonal("square"), eikonal("sqrt_edge"), tilted(1.0)):
        for r in (Rate("zero"), LAM, Rate("power", -1.0, 1.0)):
            for u in solve_state_constraint_family(H, OMEGA, LAM, r, DEFAULT_LAMBDAS, cfg):
                excess = max(excess, u.delta * float(np.max(np.abs(u.values))) + lipschitz_constant(u) - H.lipschitz_estimate)
    return excess


def _determinism():
    bad = []
    with tempfile.TemporaryDirectory() as tmp:
        for stem, cmd in sorted(GOLDEN.items()):
            blobs = []
            for k in range(2):
                out = Path(tmp) / stem / str(k)
                run(cmd, CONFIGS / f"{stem}.toml", out)
                blobs.append(data_files(out) if out.exists() else {})
            if blobs[0] != blobs[1] or not blobs[0]:
                bad.append(stem)
    return bad


def test_criterion_10_property_suites():
    tri, tri_tol = _triangle_violation(np.random.default_rng(20261015))
    apr = _a_priori_excess()
    H = quadratic("square", jointly_convex=True)
    cc = c_curve(H, OMEGA, np.linspace(-0.3, 0.3, 13).tolist(), SolveConfig(nodes=801))
    oracle = float(np.max(np.abs(np.array(cc.c) - (1 + np.array(cc.lambdas)) ** 2)))
    bad = _determinism()
    ok = tri <= tri_tol and apr <= 1e-6 and cc.convexity_violation <= 1e-6 and not bad
    assert report_criterion(
        10,
        ok,
        f"triangle max excess {tri:.1e} (tol {tri_tol:.1e}); a-priori excess {apr:.2f}; "
        f"midpoint violation {cc.convexity_violation:.1e} (oracle err {oracle:.1e}); nondeterministic configs: {bad or 'none'}",
    )
