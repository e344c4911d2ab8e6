"""Vanishing-discount experiments on scaled domains.

For a rate pair (phi, r) the solutions u_lam of

    phi(lam) u + H(x, Du) = 0   on (1 + r(lam)) Omega

are pulled back to the base grid through x -> u_lam((1 + r) x) and
normalized either by c(0) / phi (first family) or by c(lam) / phi (second
family). Limits are extrapolated in t = phi + |r|.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domains import Grid, StarDomain, scale
from .ergodic import critical_value
from .errors import SolverError, ValidationError
from .extrapolation import extrapolate_to_zero, loglog_slope
from .hamiltonians import HamiltonianSpec
from .hj_solver import FailedSolve, SolveConfig, discretize, solve_discounted, solve_state_constraint_family, pull_back
from .mather_lp import ExpansionBounds, build_lp, expansion_bounds

__all__ = [
    "DEFAULT_LAMBDAS",
    "UndefinedRateWarning",
    "Rate",
    "RatePair",
    "classify_rates",
    "FamilySolves",
    "FamilyLimitResult",
    "family_solves",
    "first_family_limit",
    "second_family_limit",
    "ExpansionReport",
    "expansion_slopes",
    "OrderingReport",
    "gamma_ordering_check",
    "CCurve",
    "c_curve",
    "discount_rate_slope",
    "characterization_residual",
]

DEFAULT_LAMBDAS = tuple(0.1 * 2.0**-k for k in range(7))
GROWTH_FACTOR = 4.0
# sup norms below this never count as growth
GROWTH_FLOOR = 1e-2


class UndefinedRateWarning(RuntimeWarning):
    """r / phi is bounded on the ladder but shows no limit."""


@dataclass(frozen=True)
class Rate:
    """lam -> coef * lam**exponent, optionally times sin(1 / lam).

    kind is one of "power", "zero", "lambda_sin".
    """

    kind: str = "power"
    coef: float = 1.0
    exponent: float = 1.0

    def __post_init__(self):
        if self.kind not in ("power", "zero", "lambda_sin"):
            raise ValidationError(f"unknown rate kind {self.kind!r}")

    def __call__(self, lam: float) -> float:
        if self.kind == "zero":
            return 0.0
        base = self.coef * lam**self.exponent
        return base * math.sin(1.0 / lam) if self.kind == "lambda_sin" else base

    def to_dict(self) -> dict:
        return {"kind": self.kind, "coef": self.coef, "exponent": self.exponent}


@dataclass(frozen=True)
class RatePair:
    phi: Rate
    r: Rate
    gamma: float
    profile: str
    lambdas: tuple[float, ...]
    ratios: tuple[float, ...]
    envelope_slope: float
    defined: bool = True

    @property
    def finite(self) -> bool:
        return self.defined and math.isfinite(self.gamma)


def _ladder(lambdas: Sequence[float]) -> np.ndarray:
    lam = np.asarray(lambdas, dtype=float)
    if lam.ndim != 1 or lam.size < 3:
        raise ValidationError("lambda ladder needs at least 3 entries")
    if np.any(lam <= 0) or np.any(np.diff(lam) >= 0):
        raise ValidationError("lambda ladder must be positive and strictly decreasing")
    return lam


def classify_rates(phi: Rate, r: Rate, lambdas: Sequence[float] = DEFAULT_LAMBDAS) -> RatePair:
    """Estimate gamma = lim r / phi and the sign profile of r on the ladder.

    The tail envelope max_{j >= k} |r_j / phi_j| is fitted against lam on a
    log-log scale; a slope above 0.2 means r / phi decays (gamma = 0). The
    running maximum max_{j <= k} |r_j / phi_j| with slope below -0.2 means it
    blows up (gamma = +-inf, nan if the sign keeps changing). Otherwise the ratios are
    extrapolated linearly in lam over the last half of the ladder; if they
    still spread by more than 5% of the envelope an
    :class:`UndefinedRateWarning` is issued and gamma is nan.
    """
    lam = _ladder(lambdas)
    ph = np.array([phi(l) for l in lam])
    if np.any(ph <= 0):
        raise ValidationError("phi must be positive on the ladder")
    rr = np.array([r(l) for l in lam])
    q = rr / ph
    pos, neg = np.any(rr > 0), np.any(rr < 0)
    profile = "oscillating" if pos and neg else "outer" if pos else "inner" if neg else "fixed"
    a = np.abs(q)
    # tail sup detects decay, running head max detects growth
    env = np.maximum.accumulate(a[::-1])[::-1]
    head = np.maximum.accumulate(a)
    if np.any(env == 0):
        return RatePair(phi, r, 0.0, profile, tuple(lam), tuple(q), math.inf)
    s = loglog_slope(lam, env)
    s_head = loglog_slope(lam, head)
    if s > 0.2:
        gamma, defined = 0.0, True
    elif s_head < -0.2:
        tail = np.sign(q[lam.size // 2 :])
        gamma = math.copysign(math.inf, tail[-1]) if np.all(tail == tail[-1]) else math.nan
        defined = not math.isnan(gamma)
        s = s_head
    else:
        half = lam.size // 2
        g, _ = extrapolate_to_zero(lam[half:], q[half:], 1)
        gamma = float(g)
        defined = float(np.ptp(q[half:])) <= 0.05 * float(env[half])
        if not defined:
            warnings.warn(
                "r/phi is bounded but not convergent on the ladder; gamma is undefined",
                UndefinedRateWarning,
                stacklevel=2,
            )
            gamma = math.nan
    return RatePair(phi, r, float(gamma), profile, tuple(lam), tuple(q), float(s), bool(defined))


@dataclass(frozen=True, eq=False)
class FamilySolves:
    """Pulled-back solutions u_lam((1 + r) x) on the base grid."""

    base_grid: Grid
    lambdas: np.ndarray
    phi: np.ndarray
    r: np.ndarray
    values: np.ndarray
    c0: float
    c_lambda: np.ndarray
    failures: tuple[tuple[float, str], ...] = ()


def family_solves(
    H: HamiltonianSpec,
    dom: StarDomain,
    phi: Rate,
    r: Rate,
    lambdas: Sequence[float] = DEFAULT_LAMBDAS,
    cfg: SolveConfig | None = None,
    threads: int = 1,
    c0: float | None = None,
) -> FamilySolves:
    """Solve the family and pull every solution back to the base grid.

    Failed solves are dropped and listed in ``failures``.

    Raises:
        SolverError: fewer than three solves succeeded.
    """
    lam = _ladder(lambdas)
    cfg = cfg or SolveConfig()
    base = scale(dom, 0.0)
    base_grid = cfg.grid_for(base)
    sols = solve_state_constraint_family(H, dom, phi, r, lam, cfg, threads=threads)
    keep, rows, failures = [], [], []
    for lam_k, sol in zip(lam, sols):
        if isinstance(sol, FailedSolve):
            failures.append((float(lam_k), sol.error))
            continue
        keep.append(sol)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rows.append(pull_back(sol, base_grid))
    if len(keep) < 3:
        raise SolverError(f"only {len(keep)} of {lam.size} family solves succeeded: {failures}")
    if c0 is None:
        c0 = critical_value(H, base, cfg)
    c_lam = np.array([critical_value(H, scale(dom, s.meta["r"]), cfg) for s in keep])
    return FamilySolves(
        base_grid,
        np.array([s.meta["lambda"] for s in keep]),
        np.array([s.meta["phi"] for s in keep]),
        np.array([s.meta["r"] for s in keep]),
        np.vstack(rows),
        float(c0),
        c_lam,
        tuple(failures),
    )


@dataclass(frozen=True, eq=False)
class FamilyLimitResult:
    """Normalized profiles on the base grid and their extrapolated limit.

    ``limit`` is None when the verdict is "diverges". ``clusters`` maps a
    subsequence label to its own extrapolated profile when subsequences were
    requested.
    """

    family: str
    base_grid: Grid
    lambdas: tuple[float, ...]
    t: tuple[float, ...]
    profiles: np.ndarray
    limit: np.ndarray | None
    verdict: str
    sup_norms: tuple[float, ...]
    residual: float
    c0: float
    c_lambda: tuple[float, ...]
    bound_constant: float
    clusters: dict = field(default_factory=dict)
    cluster_gap: float = 0.0
    cross_check: float | None = None
    failures: tuple = ()

    def __call__(self, points) -> np.ndarray:
        if self.limit is None:
            raise ValidationError("family diverges; no limit profile")
        return self.base_grid.interpolate(self.limit, points)


def _assemble(
    family: str,
    fs: FamilySolves,
    groups: Sequence | None,
    degree: int,
    cluster_tol: float,
) -> FamilyLimitResult:
    shift = fs.c0 if family == "first" else fs.c_lambda
    prof = fs.values + (np.broadcast_to(shift, fs.phi.shape) / fs.phi)[:, None]
    t = fs.phi + np.abs(fs.r)
    sup = np.max(np.abs(prof), axis=1)
    bound = float(np.max(sup / (1.0 + np.abs(fs.r) / fs.phi)))
    clusters: dict = {}
    gap = 0.0
    grows = sup[-1] >= GROWTH_FACTOR * sup[0] and sup[-1] > GROWTH_FLOOR
    limit, resid = None, math.nan
    verdict = "diverges" if grows else "converges"
    if groups is not None:
        labels = np.asarray(list(groups))
        if labels.size != fs.lambdas.size:
            raise ValidationError("one subsequence label per successful lambda is required")
        for lab in sorted(set(labels.tolist()), key=str):
            sel = labels == lab
            if sel.sum() < 2:
                raise ValidationError(f"subsequence {lab!r} needs at least 2 members")
            deg = min(degree, int(sel.sum()) - 1)
            clusters[lab] = extrapolate_to_zero(t[sel], prof[sel], deg)[0]
        vals = list(clusters.values())
        gap = max(float(np.max(np.abs(a - b))) for i, a in enumerate(vals) for b in vals[i + 1 :]) if len(vals) > 1 else 0.0
        if gap > cluster_tol:
            verdict = "diverges"
    if verdict == "converges":
        limit, resid = extrapolate_to_zero(t, prof, min(degree, t.size - 1))
    return FamilyLimitResult(
        family,
        fs.base_grid,
        tuple(fs.lambdas.tolist()),
        tuple(t.tolist()),
        prof,
        limit,
        verdict,
        tuple(sup.tolist()),
        float(resid),
        fs.c0,
        tuple(np.asarray(fs.c_lambda).tolist()),
        bound,
        clusters,
        gap,
        None,
        fs.failures,
    )


def first_family_limit(
    H: HamiltonianSpec,
    dom: StarDomain,
    rates: tuple[Rate, Rate],
    lambdas: Sequence[float] = DEFAULT_LAMBDAS,
    cfg: SolveConfig | None = None,
    threads: int = 1,
    degree: int = 2,
    solves: FamilySolves | None = None,
) -> FamilyLimitResult:
    """Limit of u_lam + c(0) / phi(lam).

    The verdict is "diverges" when the sup norm of the profiles grows by a
    factor of at least 4 across the ladder (and ends above 1e-2).
    """
    fs = solves or family_solves(H, dom, rates[0], rates[1], lambdas, cfg, threads)
    return _assemble("first", fs, None, degree, math.inf)


def second_family_limit(
    H: HamiltonianSpec,
    dom: StarDomain,
    rates: tuple[Rate, Rate],
    lambdas: Sequence[float] = DEFAULT_LAMBDAS,
    cfg: SolveConfig | None = None,
    threads: int = 1,
    degree: int = 2,
    solves: FamilySolves | None = None,
    groups: Sequence | None = None,
    cluster_tol: float = 2e-2,
    cross_check: bool = True,
) -> FamilyLimitResult:
    """Limit of u_lam + c(lam) / phi(lam).

    With ``groups`` each labelled subsequence is extrapolated on its own and
    the verdict is "diverges" when two cluster limits differ by more than
    ``cluster_tol`` in sup norm. For finite gamma the first-family limit plus
    gamma times the extrapolated slope (c(lam) - c(0)) / r(lam) is compared
    with the second-family limit; the sup difference is ``cross_check``.
    """
    fs = solves or family_solves(H, dom, rates[0], rates[1], lambdas, cfg, threads)
    res = _assemble("second", fs, groups, degree, cluster_tol)
    if not cross_check or res.limit is None:
        return res
    rp = classify_rates(rates[0], rates[1], fs.lambdas) if fs.lambdas.size >= 3 else None
    if rp is None or not rp.finite:
        return res
    first = _assemble("first", fs, None, degree, math.inf)
    if first.limit is None:
        return res
    nz = fs.r != 0
    c1 = 0.0
    if rp.gamma != 0.0 and nz.sum() >= 2:
        slopes = (fs.c_lambda[nz] - fs.c0) / fs.r[nz]
        c1 = float(extrapolate_to_zero(np.abs(fs.r[nz]), slopes, min(degree, int(nz.sum()) - 1))[0])
    diff = float(np.max(np.abs(first.limit + rp.gamma * c1 - res.limit)))
    return FamilyLimitResult(**{**res.__dict__, "cross_check": diff})


@dataclass(frozen=True, eq=False)
class ExpansionReport:
    """Slopes (c(lam) - c(0)) / r(lam) and their one-sided limits.

    ``c1_minus`` comes from r < 0 entries and ``c1_plus`` from r > 0 entries
    (nan when the ladder has none). ``lp`` holds the optimal-face bounds.
    """

    c0: float
    lambdas: tuple[float, ...]
    r: tuple[float, ...]
    c: tuple[float, ...]
    slopes: tuple[float, ...]
    c1_minus: float
    c1_plus: float
    verdict: str
    bound_constant: float
    lp: ExpansionBounds | None
    lp_agrees: bool | None
    tol: float

    def slope_table(self) -> list[tuple[float, float, float, float]]:
        return list(zip(self.lambdas, self.r, self.c, self.slopes))


def _side_limit(r: np.ndarray, s: np.ndarray, degree: int) -> tuple[float, bool]:
    """(extrapolated limit, diverging flag) for one sign group, ordered by |r| decreasing."""
    if r.size == 0:
        return math.nan, False
    order = np.argsort(-np.abs(r))
    r, s = r[order], s[order]
    a = np.abs(s)
    if a[-1] >= GROWTH_FACTOR * a[0] and a[-1] > GROWTH_FLOOR:
        return math.copysign(math.inf, s[-1]), True
    if r.size == 1:
        return float(s[0]), False
    return float(extrapolate_to_zero(np.abs(r), s, min(degree, r.size - 1))[0]), False


def expansion_slopes(
    H: HamiltonianSpec,
    dom: StarDomain,
    r: Rate,
    lambdas: Sequence[float] = DEFAULT_LAMBDAS,
    cfg: SolveConfig | None = None,
    lp_check: bool = True,
    lp_nodes: int = 101,
    lp_velocities: int = 21,
    lp_K: int = 12,
    tol: float = 2e-2,
    degree: int = 2,
    two_sided: bool = False,
) -> ExpansionReport:
    """Finite-difference expansion slopes, cross-checked by the Mather LP.

    The verdict is "diverges" if |slope| grows by a factor >= 4 along either
    sign group, "oscillates" if r changes sign and the one-sided limits
    differ by more than ``tol``, and "converges" otherwise. ``lp_agrees``
    compares each available finite-difference side with the LP bound of the
    same side (an infinite LP bound agrees with a diverging side).
    With ``two_sided`` every lambda is also evaluated at -r(lambda).
    """
    lam = _ladder(lambdas)
    cfg = cfg or SolveConfig()
    rr = np.array([r(l) for l in lam])
    if two_sided:
        lam, rr = np.concatenate([lam, lam]), np.concatenate([rr, -rr])
    if np.all(rr == 0):
        raise ValidationError("r vanishes on the whole ladder")
    c0 = critical_value(H, scale(dom, 0.0), cfg)
    cl = np.array([critical_value(H, scale(dom, float(x)), cfg) if x != 0 else c0 for x in rr])
    slopes = np.full(lam.size, np.nan)
    nz = rr != 0
    slopes[nz] = (cl[nz] - c0) / rr[nz]
    neg, pos = rr < 0, rr > 0
    c1m, div_m = _side_limit(rr[neg], slopes[neg], degree)
    c1p, div_p = _side_limit(rr[pos], slopes[pos], degree)
    if div_m or div_p:
        verdict = "diverges"
    elif neg.any() and pos.any() and abs(c1m - c1p) > tol:
        verdict = "oscillates"
    else:
        verdict = "converges"
    lp_res, agrees = None, None
    if lp_check:
        lp = build_lp(H, dom, velocities=lp_velocities, K=lp_K, nodes=lp_nodes)
        lp_res = expansion_bounds(lp)
        agrees = True
        for fd, bound, div in ((c1m, lp_res.c1_minus, div_m), (c1p, lp_res.c1_plus, div_p)):
            if math.isnan(fd):
                continue
            if div or not math.isfinite(bound):
                agrees &= div and not math.isfinite(bound)
            else:
                agrees &= abs(fd - bound) <= tol
    finite = slopes[np.isfinite(slopes)]
    return ExpansionReport(
        float(c0),
        tuple(lam.tolist()),
        tuple(rr.tolist()),
        tuple(cl.tolist()),
        tuple(slopes.tolist()),
        float(c1m),
        float(c1p),
        verdict,
        float(np.max(np.abs(finite))) if finite.size else math.nan,
        lp_res,
        None if agrees is None else bool(agrees),
        float(tol),
    )


@dataclass(frozen=True, eq=False)
class OrderingReport:
    gammas: tuple[float, ...]
    limits: dict
    base_grid: Grid
    ordering_violation: float
    concavity_violation: float
    midpoint_gap: float
    violations: tuple[str, ...]
    equal_interior: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations


def gamma_ordering_check(
    H: HamiltonianSpec,
    dom: StarDomain,
    gammas: Sequence[float],
    lambdas: Sequence[float] = DEFAULT_LAMBDAS,
    cfg: SolveConfig | None = None,
    tol: float = 1e-3,
    threads: int = 1,
) -> OrderingReport:
    """u^gamma for phi = lam, r = gamma lam; checks monotone decrease and
    midpoint concavity in gamma.

    ``midpoint_gap`` is the largest sup|u^a + u^b - 2 u^m| over triples with
    m = (a + b) / 2. ``equal_interior`` records, for gamma > 0, whether
    u^gamma touches u^0 at an interior node within ``tol``.
    """
    gs = sorted(float(g) for g in gammas)
    if any(not math.isfinite(g) for g in gs):
        raise ValidationError("gammas must be finite")
    cfg = cfg or SolveConfig()
    c0 = critical_value(H, scale(dom, 0.0), cfg)
    limits = {}
    grid = None
    for g in gs:
        r = Rate("zero") if g == 0 else Rate("power", g, 1.0)
        res = first_family_limit(H, dom, (Rate("power", 1.0, 1.0), r), lambdas, cfg, threads,
                                 solves=family_solves(H, dom, Rate("power", 1.0, 1.0), r, lambdas, cfg, threads, c0=c0))
        if res.limit is None:
            raise SolverError(f"u^gamma for gamma = {g} did not converge")
        limits[g] = res.limit
        grid = res.base_grid
    viol: list[str] = []
    ordv = 0.0
    for a, b in zip(gs, gs[1:]):
        excess = float(np.max(limits[b] - limits[a]))
        ordv = max(ordv, excess)
        if excess > tol:
            viol.append(f"u^{b:g} exceeds u^{a:g} by {excess:.3e}")
    concv, gap = 0.0, 0.0
    for i, a in enumerate(gs):
        for b in gs[i + 1 :]:
            m = 0.5 * (a + b)
            if m in limits:
                mid = 0.5 * (limits[a] + limits[b]) - limits[m]
                concv = max(concv, float(np.max(mid)))
                gap = max(gap, float(np.max(np.abs(limits[a] + limits[b] - 2 * limits[m]))))
                if np.max(mid) > tol:
                    viol.append(f"midpoint concavity fails for ({a:g}, {b:g}) by {np.max(mid):.3e}")
    touch = {}
    if 0.0 in limits and grid is not None:
        interior = ~grid.boundary
        for g in gs:
            if g > 0:
                touch[g] = bool(np.any(np.abs(limits[g] - limits[0.0])[interior] <= tol))
    return OrderingReport(tuple(gs), limits, grid, ordv, concv, gap, tuple(viol), touch)


@dataclass(frozen=True)
class CCurve:
    lambdas: tuple[float, ...]
    c: tuple[float, ...]
    left: tuple[float, ...]
    right: tuple[float, ...]
    kinks: tuple[float, ...]
    convexity_violation: float | None
    derivative_at_zero: tuple[float, float] | None

    def table(self) -> list[tuple[float, float, float, float]]:
        return list(zip(self.lambdas, self.c, self.left, self.right))


def c_curve(
    H: HamiltonianSpec,
    dom: StarDomain,
    lambdas: Sequence[float],
    cfg: SolveConfig | None = None,
    kink_tol: float = 1e-2,
) -> CCurve:
    """c(lam) on (1 + lam) Omega over an increasing grid.

    One-sided difference quotients are nan at the ends. A kink is reported
    where they jump by more than ``kink_tol`` and by more than four times the
    median jump, so smooth curvature on a coarse grid is not flagged. For jointly convex H the
    largest midpoint violation c_i - (c_{i-1} + c_{i+1}) / 2 is reported
    (grids are expected to be uniform for this check).
    """
    lam = np.asarray(lambdas, dtype=float)
    if lam.ndim != 1 or lam.size < 3 or np.any(np.diff(lam) <= 0):
        raise ValidationError("c-curve grid must be increasing with at least 3 points")
    if np.any(1.0 + lam <= 0):
        raise ValidationError("every grid point needs 1 + lambda > 0")
    cfg = cfg or SolveConfig()
    c = np.array([critical_value(H, scale(dom, float(l)), cfg) for l in lam])
    q = np.diff(c) / np.diff(lam)
    left = np.concatenate([[np.nan], q])
    right = np.concatenate([q, [np.nan]])
    jumps = np.abs(q[1:] - q[:-1])
    kinks = lam[1:-1][(jumps > kink_tol) & (jumps > 4.0 * np.median(jumps))]
    conv = None
    if H.jointly_convex:
        conv = float(np.max(c[1:-1] - 0.5 * (c[:-2] + c[2:])))
    d0 = None
    zero = np.flatnonzero(lam == 0.0)
    if zero.size and 0 < zero[0] < lam.size - 1:
        k = int(zero[0])
        d0 = (float(left[k]), float(right[k]))
    return CCurve(
        tuple(lam.tolist()), tuple(c.tolist()), tuple(left.tolist()), tuple(right.tolist()), tuple(kinks.tolist()), conv, d0
    )


def discount_rate_slope(
    H: HamiltonianSpec,
    dom: StarDomain,
    deltas: Sequence[float],
    cfg: SolveConfig | None = None,
    c0: float | None = None,
) -> tuple[float, list[tuple[float, float]]]:
    """Log-log slope of sup|delta u_delta + c(0)| against delta on the fixed domain."""
    d = _ladder(deltas)
    cfg = cfg or SolveConfig()
    base = scale(dom, 0.0)
    if c0 is None:
        c0 = critical_value(H, base, cfg)
    disc = discretize(H, cfg.grid_for(base), cfg)
    err = [float(np.max(np.abs(dl * solve_discounted(H, base, float(dl), cfg, disc=disc).values + c0))) for dl in d]
    return loglog_slope(d, err), list(zip(d.tolist(), err))


def characterization_residual(mu, g, profile: FamilyLimitResult, gamma: float) -> float:
    """gamma <mu, g> + <mu, u^gamma> for an occupation measure ``mu``.

    ``g`` is sampled on the measure's columns (as in LPInstance.g) and
    u^gamma is interpolated from the family limit at the measure's states.
    """
    if profile.limit is None:
        raise ValidationError("profile has no limit")
    sup = mu.weights > 0
    x = mu.nodes[mu.states[sup]]
    u = profile.base_grid.interpolate(profile.limit, x)
    gs = np.asarray(g, dtype=float)[sup]
    w = mu.weights[sup]
    pair_g = float(w @ gs) if gamma != 0 else 0.0
    return float(gamma * pair_g + w @ u)
