"""Additive eigenvalues, maximal subsolutions S(., z) and Aubry sets."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit
from scipy.optimize import minimize_scalar

from .domains import Grid, ScaledDomain, StarDomain, scale
from .errors import NegativeCycleError, ValidationError
from .extrapolation import extrapolate_to_zero
from .hamiltonians import HamiltonianSpec, kind_check
from .hj_solver import SolveConfig, discretize, solve_discounted

__all__ = [
    "DEFAULT_DELTAS",
    "ExtrapolationWarning",
    "ErgodicResult",
    "IntrinsicDistance",
    "eigenvalue",
    "eigenvalue_closed_form",
    "critical_value",
    "maximal_subsolution",
    "aubry_set",
    "eigenvalue_stability_check",
]

DEFAULT_DELTAS = (1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3)


class ExtrapolationWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class ErgodicResult:
    """Eigenvalue estimate from the discounted ladder.

    ``estimates[k]`` is -delta_k u_{delta_k}(x_ref).
    """

    c: float
    deltas: tuple[float, ...]
    estimates: tuple[float, ...]
    order: int
    residual: float
    x_ref: tuple[float, ...]
    unstable: bool = False

    def table(self) -> list[tuple[float, float]]:
        return list(zip(self.deltas, self.estimates))


@dataclass(frozen=True, eq=False)
class IntrinsicDistance:
    """S(., z) sampled on a grid."""

    grid: Grid
    vertex: np.ndarray
    vertex_index: int
    values: np.ndarray
    c: float
    edges: int
    meta: dict = field(default_factory=dict)

    def __call__(self, points) -> np.ndarray:
        return self.grid.interpolate(self.values, points)


def _as_scaled(sdom: ScaledDomain | StarDomain) -> ScaledDomain:
    return scale(sdom, 0.0) if isinstance(sdom, StarDomain) else sdom


def _check_ladder(deltas: Sequence[float]) -> np.ndarray:
    d = np.asarray(deltas, dtype=float)
    if d.ndim != 1 or d.size < 3:
        raise ValidationError("discount ladder needs at least 3 entries")
    if np.any(d <= 0) or np.any(np.diff(d) >= 0):
        raise ValidationError("discount ladder must be positive and strictly decreasing")
    return d


def eigenvalue(
    H: HamiltonianSpec,
    sdom: ScaledDomain | StarDomain,
    deltas: Sequence[float] = DEFAULT_DELTAS,
    x_ref=0.0,
    cfg: SolveConfig | None = None,
    degree: int = 2,
) -> ErgodicResult:
    """Extrapolate -delta u_delta(x_ref) to delta = 0.

    The fit is a degree-``degree`` least-squares polynomial in delta. The two
    exact extrapolations through the last two windows of ``degree + 1``
    consecutive discounts are compared; if they differ by more than ten fit
    residuals an :class:`ExtrapolationWarning` is issued.
    """
    d = _check_ladder(deltas)
    sdom = _as_scaled(sdom)
    cfg = cfg or SolveConfig()
    disc = discretize(H, cfg.grid_for(sdom), cfg)
    xr = np.atleast_1d(np.asarray(x_ref, dtype=float))
    est = []
    for delta in d:
        u = solve_discounted(H, sdom, float(delta), cfg, disc=disc)
        est.append(float(-delta * u(xr[None, :] if H.dim == 2 else xr)[0]))
    est_arr = np.array(est)
    deg = min(degree, d.size - 1)
    c, resid = extrapolate_to_zero(d, est_arr, deg)
    c = float(c)
    unstable = False
    k = deg + 1
    if d.size > k:
        # exact fits through the last two windows of deg + 1 consecutive discounts
        c_last = float(extrapolate_to_zero(d[-k:], est_arr[-k:], deg)[0])
        c_prev = float(extrapolate_to_zero(d[-k - 1 : -1], est_arr[-k - 1 : -1], deg)[0])
        if abs(c_last - c_prev) > 10.0 * resid + 1e-12 * (1.0 + abs(c)):
            unstable = True
            warnings.warn(
                f"eigenvalue extrapolation unstable: windows give {c_prev:.6g} and {c_last:.6g} "
                f"(fit residual {resid:.2e})",
                ExtrapolationWarning,
                stacklevel=2,
            )
    return ErgodicResult(c, tuple(d.tolist()), tuple(est), deg, resid, tuple(xr.tolist()), unstable)


def _min_potential(H: HamiltonianSpec, sdom: ScaledDomain) -> tuple[float, np.ndarray]:
    V = H.potential
    if sdom.dim == 1:
        lo, hi = sdom.extent
        xs = np.linspace(lo, hi, 4001)
        bps = np.array([b for b in V.breakpoints if lo <= b <= hi])
        xs = np.unique(np.concatenate([xs, bps]))
        vals = V(xs[:, None])
        k = int(np.argmin(vals))
        best, arg = float(vals[k]), xs[k]
        a, b = xs[max(k - 1, 0)], xs[min(k + 1, xs.size - 1)]
        if b > a:
            res = minimize_scalar(lambda t: float(V(np.array([[t]]))[0]), bounds=(a, b), method="bounded",
                                  options={"xatol": 1e-13})
            if res.fun < best:
                best, arg = float(res.fun), res.x
        return best, np.array([arg])
    rr = np.linspace(0.0, 1.0, 401)
    th = np.linspace(0.0, 2 * np.pi, 721)
    RR, TT = np.meshgrid(rr, th, indexing="ij")
    lim = sdom.s * sdom.base.rho(TT)
    pts = np.stack([RR * lim * np.cos(TT), RR * lim * np.sin(TT)], axis=-1).reshape(-1, 2)
    vals = V(pts)
    k = int(np.argmin(vals))
    from scipy.optimize import minimize

    res = minimize(lambda y: float(V(sdom.project(y[None, :]))[0]), pts[k], method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14})
    if res.fun < vals[k]:
        return float(res.fun), sdom.project(res.x[None, :])[0]
    return float(vals[k]), pts[k]


def eigenvalue_closed_form(H: HamiltonianSpec, sdom: ScaledDomain | StarDomain) -> float:
    """c = -min V over the closed scaled domain (eikonal kinds only)."""
    kind_check(H, "eikonal", "tilted")
    return 0.0 - _min_potential(H, _as_scaled(sdom))[0] + 0.0


def critical_value(H: HamiltonianSpec, sdom, cfg: SolveConfig | None = None, deltas=DEFAULT_DELTAS) -> float:
    """Closed form for eikonal kinds, discounted extrapolation otherwise."""
    if H.is_eikonal_type:
        return eigenvalue_closed_form(H, sdom)
    return eigenvalue(H, sdom, deltas, cfg=cfg).c


@njit(cache=True, nogil=True)
def _label_correcting(n, ptr, nbr, cost, src, tol):
    dist = np.full(n, np.inf)
    dist[src] = 0.0
    inq = np.zeros(n, dtype=np.bool_)
    count = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    head = 0
    size = 1
    queue[0] = src
    inq[src] = True
    passes = 0
    while size > 0:
        i = queue[head]
        head = (head + 1) % n
        size -= 1
        inq[i] = False
        di = dist[i]
        for e in range(ptr[i], ptr[i + 1]):
            j = nbr[e]
            nd = di + cost[e]
            if nd < dist[j] - tol:
                dist[j] = nd
                passes += 1
                if not inq[j]:
                    count[j] += 1
                    if count[j] > n:
                        return dist, j, passes
                    queue[(head + size) % n] = j
                    size += 1
                    inq[j] = True
    return dist, -1, passes


def _edge_list(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    n = grid.size
    if grid.dim == 1:
        src, dst = [], []
        for step in (1, 2):
            a = np.arange(n - step)
            src += [a, a + step]
            dst += [a + step, a]
        return np.concatenate(src), np.concatenate(dst)
    from scipy.spatial import cKDTree

    pairs = cKDTree(grid.nodes).query_pairs(math.sqrt(5.0) * grid.spacing * (1 + 1e-9), output_type="ndarray")
    p, q = grid.nodes[pairs[:, 0]], grid.nodes[pairs[:, 1]]
    ok = np.ones(pairs.shape[0], dtype=bool)
    for t in (0.25, 0.5, 0.75):
        ok &= grid.domain.contains(p + t * (q - p), tol=1e-9)
    pairs = pairs[ok]
    return np.concatenate([pairs[:, 0], pairs[:, 1]]), np.concatenate([pairs[:, 1], pairs[:, 0]])


def _edge_costs(H: HamiltonianSpec, grid: Grid, c: float, src, dst, h: float) -> np.ndarray:
    x0, x1 = grid.nodes[src], grid.nodes[dst]
    disp = x1 - x0
    d = np.hypot.reduce(disp, axis=1) if grid.dim == 2 else np.abs(disp[:, 0])
    mid = 0.5 * (x0 + x1)
    if H.is_eikonal_type:
        T = d / min(h, 1.0)
        return T * (c + H.lagrangian(mid, disp / T[:, None]))
    lo, hi = d / h, 10.0 * d / h
    g = (math.sqrt(5.0) - 1.0) / 2.0

    def f(T):
        return T * (c + H.lagrangian(mid, disp / T[:, None]))

    a, b = lo.copy(), hi.copy()
    for _ in range(60):
        p = b - g * (b - a)
        q = a + g * (b - a)
        left = f(p) <= f(q)
        b = np.where(left, q, b)
        a = np.where(left, a, p)
    return np.minimum(f(0.5 * (a + b)), f(lo))


def _nearest_node(grid: Grid, z) -> int:
    zz = np.atleast_1d(np.asarray(z, dtype=float)).reshape(grid.dim)
    return int(np.argmin(np.sum((grid.nodes - zz) ** 2, axis=1)))


def maximal_subsolution(
    H: HamiltonianSpec,
    sdom: ScaledDomain | StarDomain,
    z,
    c: float,
    grid: Grid | None = None,
    cfg: SolveConfig | None = None,
) -> IntrinsicDistance:
    """S(x, z) as the cheapest grid path from z to x.

    Each edge x -> y costs min over T >= |y - x|/h of T [c + L(mid, (y - x)/T)].
    The vertex is snapped to the nearest grid node.

    Raises:
        NegativeCycleError: the graph has a cycle of negative cost, i.e. c is
            below the eigenvalue of the domain.
    """
    sdom = _as_scaled(sdom)
    cfg = cfg or SolveConfig()
    grid = grid if grid is not None else cfg.grid_for(sdom)
    h = cfg.velocity_bound if cfg.velocity_bound is not None else H.velocity_bound
    src, dst = _edge_list(grid)
    cost = _edge_costs(H, grid, float(c), src, dst, h)
    fin = np.isfinite(cost)
    src, dst, cost = src[fin], dst[fin], cost[fin]
    order = np.lexsort((dst, src))
    src, dst, cost = src[order], dst[order], cost[order]
    ptr = np.concatenate([[0], np.cumsum(np.bincount(src, minlength=grid.size))]).astype(np.int64)
    zi = _nearest_node(grid, z)
    tol = 1e-13 * (1.0 + float(np.max(np.abs(cost))) if cost.size else 1.0)
    dist, bad, passes = _label_correcting(grid.size, ptr, dst.astype(np.int64), cost, zi, tol)
    if bad >= 0:
        raise NegativeCycleError(
            f"negative cycle through node {bad}: c = {c} is below the eigenvalue of the domain"
        )
    return IntrinsicDistance(grid, grid.nodes[zi].copy(), zi, dist, float(c), int(src.size), {"relaxations": int(passes)})


def _super_residual_at(S: IntrinsicDistance, H: HamiltonianSpec, k: int) -> float:
    """Violation of H(z, DS) >= c at node k (1D)."""
    from .hj_solver import _min_on

    x = S.grid.x
    v = S.values
    n = x.size
    xi = x[k : k + 1, None]
    a = (v[k] - v[k - 1]) / (x[k] - x[k - 1]) if k > 0 else -np.inf
    b = (v[k + 1] - v[k]) / (x[k + 1] - x[k]) if k < n - 1 else np.inf
    if k == 0:
        hval = _min_on(H, xi, np.array([-np.inf]), np.array([b]))[0]
    elif k == n - 1:
        hval = _min_on(H, xi, np.array([a]), np.array([np.inf]))[0]
    elif a <= b:
        hval = _min_on(H, xi, np.array([a]), np.array([b]))[0]
    else:
        hval = max(H.H(xi, np.array([[a]]))[0], H.H(xi, np.array([[b]]))[0])
    return max(S.c - float(hval), 0.0)


def aubry_set(
    H: HamiltonianSpec,
    sdom: ScaledDomain | StarDomain,
    c: float,
    tol: float | None = None,
    grid: Grid | None = None,
    cfg: SolveConfig | None = None,
) -> np.ndarray:
    """Grid nodes in the Aubry set.

    Eikonal kinds: nodes with V <= -c + tol (default tol 1e-9 (1 + |c|)).
    Other kinds: nodes z whose S(., z) passes the supersolution test at z
    within tol (default: the grid spacing); candidates are restricted to nodes
    where min_p H(z, p) >= c - tol, which every Aubry point satisfies.
    """
    sdom = _as_scaled(sdom)
    cfg = cfg or SolveConfig()
    grid = grid if grid is not None else cfg.grid_for(sdom)
    if tol is None:
        tol = 1e-9 * (1.0 + abs(c)) if H.is_eikonal_type else grid.spacing
    if H.is_eikonal_type:
        vals = H.potential(grid.nodes)
        return grid.nodes[vals <= -c + tol].copy()
    if grid.dim != 1:
        raise ValidationError("residual-based Aubry detection is implemented in 1D")
    from .hj_solver import _argmin_p

    pmin = _argmin_p(H, grid.nodes)
    hmin = H.H(grid.nodes, pmin[:, None])
    cand = np.flatnonzero(hmin >= c - tol)
    found = []
    for k in cand:
        S = maximal_subsolution(H, sdom, grid.nodes[k], c, grid=grid, cfg=cfg)
        if _super_residual_at(S, H, int(k)) <= tol:
            found.append(k)
    return grid.nodes[np.array(found, dtype=int)].copy()


def eigenvalue_stability_check(
    H: HamiltonianSpec,
    dom: StarDomain,
    r_list: Sequence[float],
    cfg: SolveConfig | None = None,
    tol: float = 1e-3,
) -> dict:
    """c on each (1 + r) dom, and whether the Aubry set stays strictly inside.

    When the Aubry set of the base domain sits compactly inside every scaled
    domain, c is expected to stay constant.
    """
    cfg = cfg or SolveConfig()
    base = scale(dom, 0.0)
    c0 = critical_value(H, base, cfg)
    grid = cfg.grid_for(base)
    A = aubry_set(H, base, c0, grid=grid, cfg=cfg)
    margin = 2.0 * grid.spacing
    values = {}
    inside_all = True
    for r in r_list:
        sd = scale(dom, float(r))
        values[float(r)] = critical_value(H, sd, cfg)
        # strict interior: shrink the scaled domain by the margin
        shrink = max(sd.s - margin / max(dom.min_rho, 1e-12), 1e-6)
        if A.size and not np.all(dom.contains(A, s=shrink)):
            inside_all = False
    cs = np.array(list(values.values()))
    return {
        "c0": c0,
        "c": values,
        "aubry_interior": inside_all,
        "constant_observed": bool(np.all(np.abs(cs - c0) <= tol)),
    }
