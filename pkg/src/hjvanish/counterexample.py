"""Divergence of the second normalization under inner approximation.

A nonnegative piecewise-linear potential on [-1, 1] is built whose minimum
over [-1 + r_k, 1 - r_k], r_k = 4^-k, sits at the single point
z_k = s_k (1 - 4^-k) with s_k = (-1)^k and V(z_k) = 2^-k. Tooth peaks of
height 3 * 2^-k at s_k (1 - 4^-(k+1)) separate the wells. Past the deepest
feature V falls linearly to 0 at both ends.

For H = |p| - V the constrained eigenvalue is c_k = -2^-k, the Aubry set of
(1 - r_k)(-1, 1) is {z_k}, and the maximal solution there is S(., z_k). The
discount is chosen as phi_k = tau_k r_k^2 where tau_k is the fixed-domain
modulus, so the normalized solutions follow S(., z_k) and alternate between
the two limits S(., -1) and S(., +1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .domains import StarDomain, interval, scale
from .ergodic import eigenvalue_closed_form, maximal_subsolution
from .errors import InvariantViolationError, ModulusSearchError, ValidationError
from .extrapolation import extrapolate_to_zero
from .hamiltonians import Potential, eikonal, potential_from_table
from .hj_solver import SolveConfig, discretize, pull_back, solve_discounted

__all__ = [
    "SawtoothPotential",
    "build_potential",
    "minimizer_scan",
    "DivergenceCertificate",
    "divergence_experiment",
    "l1_norm",
]

# argmin ties within this are treated as one minimizer set
_TIE = 1e-12


@dataclass(frozen=True, eq=False)
class SawtoothPotential:
    K: int
    xs: np.ndarray
    values: np.ndarray
    schedule: tuple[tuple[int, float, float, int, float], ...]
    potential: Potential
    l1: float

    def __call__(self, x) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self.xs, self.values)


def _table(K: int) -> tuple[np.ndarray, np.ndarray]:
    pts = {}
    for k in range(1, K + 1):
        s = (-1) ** k
        pts[s * (1 - 4.0**-k)] = 2.0**-k
        pts[s * (1 - 4.0 ** -(k + 1))] = 3 * 2.0**-k
    # the k = 0 peak closes the centre segment on the right
    pts[0.75] = 3.0
    pts[-1.0] = 0.0
    pts[1.0] = 0.0
    xs = np.array(sorted(pts))
    return xs, np.array([pts[x] for x in xs])


def _argmin_set(xs: np.ndarray, vals: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Exact argmin of the piecewise-linear interpolant over [lo, hi]."""
    cand = np.concatenate([xs[(xs > lo) & (xs < hi)], [lo, hi]])
    v = np.interp(cand, xs, vals)
    return np.unique(cand[v <= v.min() + _TIE])


def build_potential(K: int = 4) -> SawtoothPotential:
    """The self-similar sawtooth of depth K.

    Raises:
        ValidationError: K outside [2, 20].
        InvariantViolationError: a scan at resolution 4^-(K+1) contradicts
            the construction.
    """
    if not isinstance(K, (int, np.integer)) or not 2 <= K <= 20:
        raise ValidationError("sawtooth depth K must be an integer in [2, 20]")
    K = int(K)
    xs, vals = _table(K)
    # scan check: V >= 0, zeros only at the ends, unique alternating minimizers
    scan = np.unique(np.concatenate([np.linspace(-1.0, 1.0, 2 * 4 ** (K + 1) + 1), xs]))
    sv = np.interp(scan, xs, vals)
    if np.any(sv < 0) or not np.all(sv[(scan > -1) & (scan < 1)] > 0):
        raise InvariantViolationError("sawtooth must be positive inside and vanish only at +-1")
    schedule = []
    for k in range(1, K + 1):
        r = 4.0**-k
        s = (-1) ** k
        z = s * (1 - r)
        inside = (scan >= -1 + r - 1e-15) & (scan <= 1 - r + 1e-15)
        k_min = np.flatnonzero(inside)[np.argmin(sv[inside])]
        arg = _argmin_set(xs, vals, -1 + r, 1 - r)
        if arg.size != 1 or abs(arg[0] - z) > 1e-14 or abs(scan[k_min] - z) > 4.0 ** -(K + 1):
            raise InvariantViolationError(f"minimizer for r = 4^-{k} is {arg}, expected {z}")
        vz = float(np.interp(z, xs, vals))
        if abs(vz - 2.0**-k) > 1e-15:
            raise InvariantViolationError(f"V(z_{k}) = {vz}, expected {2.0 ** -k}")
        schedule.append((k, r, float(z), s, vz))
    l1 = float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(xs)))
    if not l1 > 0:
        raise InvariantViolationError("sawtooth has zero L1 norm")
    pot = potential_from_table(xs, vals, name=f"sawtooth{K}")
    return SawtoothPotential(K, xs, vals, tuple(schedule), pot, l1)


def l1_norm(V: Potential | SawtoothPotential) -> float:
    """||V||_L1 on (-1, 1); exact trapezoid sum for piecewise-linear tables."""
    if isinstance(V, SawtoothPotential):
        return V.l1
    bps = [b for b in V.breakpoints if -1 < b < 1]
    val, _ = quad(lambda t: float(abs(V(np.array([[t]]))[0])), -1.0, 1.0, points=bps or None, limit=200,
                  epsabs=1e-13, epsrel=1e-12)
    return float(val)


def minimizer_scan(V: SawtoothPotential | Potential, r_values) -> list[dict]:
    """Argmin set of V over [-1 + r, 1 - r] for each r (0 < r <= 1/4 expected).

    Piecewise-linear tables are minimized exactly over breakpoints and ends;
    other potentials by a 20001-point scan.
    """
    rows = []
    for r in r_values:
        r = float(r)
        if not 0 < r < 1:
            raise ValidationError("r must lie in (0, 1)")
        if isinstance(V, SawtoothPotential):
            arg = _argmin_set(V.xs, V.values, -1 + r, 1 - r)
            vmin = float(V(arg[0]))
        else:
            xs = np.linspace(-1 + r, 1 - r, 20001)
            vals = V(xs[:, None])
            vmin = float(vals.min())
            arg = xs[vals <= vmin + _TIE]
        signs = np.unique(np.sign(np.round(arg, 14)))
        side = int(signs[0]) if signs.size == 1 else 0
        rows.append({"r": r, "argmin": tuple(arg.tolist()), "min": vmin, "side": side, "unique": arg.size == 1})
    return rows


@dataclass(frozen=True, eq=False)
class DivergenceCertificate:
    """Odd/even subsequence limits of u_phi + c / phi and their gap.

    ``table`` rows are (k, r_k, z_k, c_k, tau_k, phi_k, r_k / phi_k,
    achieved modulus error at tau_k). ``core_distance`` lists, per k, the sup
    over [-0.9, 0.9] of |S_k pulled back - S(., s_k)|.
    """

    K: int
    base_x: np.ndarray
    table: tuple[tuple, ...]
    profiles: np.ndarray
    limit_odd: np.ndarray
    limit_even: np.ndarray
    reference_odd: np.ndarray
    reference_even: np.ndarray
    gap: float
    l1: float
    threshold: float
    core_distance: tuple[float, ...]
    meta: dict = field(default_factory=dict)

    @property
    def diverges(self) -> bool:
        return self.gap >= self.threshold


def _modulus_error(H, sdom, delta, c, S, cfg, disc) -> float:
    u = solve_discounted(H, sdom, delta, cfg, disc=disc)
    return float(np.max(np.abs(u.values + c / delta - S.values)))


def _find_tau(H, sdom, c, S, target, cfg, disc, lo, hi, ratio=1.02) -> tuple[float, float]:
    """Largest delta in [lo, hi] (log bisection) with modulus error <= target."""
    err_hi = _modulus_error(H, sdom, hi, c, S, cfg, disc)
    if err_hi <= target:
        return hi, err_hi
    err_lo = _modulus_error(H, sdom, lo, c, S, cfg, disc)
    if err_lo > target:
        raise ModulusSearchError(
            f"modulus error {err_lo:.3e} at delta = {lo:g} exceeds target {target:.3e}"
        )
    while hi / lo > ratio:
        mid = math.sqrt(lo * hi)
        err = _modulus_error(H, sdom, mid, c, S, cfg, disc)
        if err <= target:
            lo, err_lo = mid, err
        else:
            hi = mid
    # spot checks below tau guard the monotonicity assumption
    for f in (0.5, 0.25, 0.0625):
        err = _modulus_error(H, sdom, lo * f, c, S, cfg, disc)
        if err > target:
            lo, err_lo = lo * f * f, _modulus_error(H, sdom, lo * f * f, c, S, cfg, disc)
            if err_lo > target:
                raise ModulusSearchError(f"modulus error is not monotone near delta = {lo:g}")
    return lo, err_lo


def divergence_experiment(
    K: int = 4,
    cfg: SolveConfig | None = None,
    potential: Potential | None = None,
    tau_range: tuple[float, float] = (1e-8, 1e-1),
    tol: float = 2e-2,
    degree: int = 1,
) -> DivergenceCertificate:
    """Run the inner-approximation divergence construction.

    With ``potential`` given (a control case) the same pipeline runs with
    that V and the vertex z_k is its unique minimizer on the shrunk domain.

    Raises:
        ValidationError: K < 3.
        ModulusSearchError: no delta in ``tau_range`` meets the modulus target.
        InvariantViolationError: a constrained minimizer is not unique.
    """
    if not isinstance(K, (int, np.integer)) or K < 3:
        raise ValidationError("divergence experiment needs depth K >= 3")
    cfg = cfg or SolveConfig()
    if potential is None:
        saw = build_potential(int(K))
        V = saw.potential
        l1 = saw.l1
        sched = [(k, r, z) for k, r, z, _, _ in saw.schedule]
    else:
        saw = None
        V = potential
        l1 = l1_norm(V)
        sched = []
        for k in range(1, K + 1):
            row = minimizer_scan(V, [4.0**-k])[0]
            if not row["unique"]:
                raise InvariantViolationError(f"minimizer of the control potential is not unique at k = {k}")
            sched.append((k, 4.0**-k, row["argmin"][0]))
    H = eikonal(V, 1)
    dom: StarDomain = interval(1.0)
    base = scale(dom, 0.0)
    base_grid = cfg.grid_for(base)
    table, profiles, core = [], [], []
    core_mask = np.abs(base_grid.x) <= 0.9 + 1e-12
    ref = {}
    for sgn in (-1.0, 1.0):
        ref[sgn] = maximal_subsolution(H, base, sgn, eigenvalue_closed_form(H, base), grid=base_grid, cfg=cfg)
    for k, r, z in sched:
        sdom = scale(dom, -r)
        grid = cfg.grid_for(sdom)
        disc = discretize(H, grid, cfg)
        c = eigenvalue_closed_form(H, sdom)
        S = maximal_subsolution(H, sdom, z, c, grid=grid, cfg=cfg)
        tau, err = _find_tau(H, sdom, c, S, r, cfg, disc, *tau_range)
        phi = tau * r * r
        u = solve_discounted(H, sdom, phi, cfg, disc=disc)
        profiles.append(pull_back(u, base_grid) + c / phi)
        limit_vertex = math.copysign(1.0, z) if z != 0 else 0.0
        if limit_vertex in ref:
            s_back = S.grid.interpolate(S.values, sdom.s * base_grid.nodes)
            core.append(float(np.max(np.abs(s_back - ref[limit_vertex].values)[core_mask])))
        else:
            core.append(math.nan)
        table.append((k, r, z, c, tau, phi, r / phi, err))
    prof = np.vstack(profiles)
    # c_k - c(0) = -2^-k dominates r_k here, so it enters the error model
    c0 = eigenvalue_closed_form(H, base)
    t = np.array([row[5] + row[1] + abs(row[3] - c0) for row in table])
    ks = np.array([row[0] for row in table])
    limits = {}
    for parity in (1, 0):
        sel = ks % 2 == parity
        limits[parity] = extrapolate_to_zero(t[sel], prof[sel], min(degree, int(sel.sum()) - 1))[0]
    gap = float(np.max(np.abs(limits[1] - limits[0])))
    return DivergenceCertificate(
        int(K),
        base_grid.x.copy(),
        tuple(table),
        prof,
        limits[1],
        limits[0],
        ref[-1.0].values.copy(),
        ref[1.0].values.copy(),
        gap,
        l1,
        l1 - tol,
        tuple(core),
        {"potential": V.name, "control": saw is None, "nodes": base_grid.size},
    )
