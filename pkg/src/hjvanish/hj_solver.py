"""Semi-Lagrangian solver for discounted state-constraint problems.

The fixed point

    u(x_i) = min_v [ I[u](x_i + dt v) / (1 + delta dt) + dt L(x_i, v) ]

is computed by Gauss-Seidel sweeps in alternating orders. A velocity is
admissible at x_i iff the foot point x_i + dt v lies in the closed domain and
L(x_i, v) is finite. When the interpolation stencil of the foot point
contains x_i itself the update is solved for u(x_i) exactly, so staying put
costs (1 + delta dt) L / delta in one step instead of a geometric series of
sweeps. This keeps tiny discounts (1e-7 and below) cheap.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from numba import njit

from .domains import Grid, ScaledDomain, StarDomain, build_grid, scale
from .errors import EmptyAdmissibleSetError, HJError, NonConvergenceError, ValidationError
from .hamiltonians import HamiltonianSpec

__all__ = [
    "SolveConfig",
    "ValueFunction",
    "FailedSolve",
    "Discretization",
    "discretize",
    "velocity_grid",
    "solve_discounted",
    "rescale_value",
    "pull_back",
    "residual_check",
    "solve_state_constraint_family",
    "lipschitz_constant",
]


@dataclass(frozen=True)
class SolveConfig:
    """Discretization parameters.

    Attributes:
        nodes: 1D node count (ignored when ``spacing`` is set).
        spacing: target grid spacing; overrides ``nodes``.
        velocities: M points per axis in [-h, h], odd so that v = 0 is present.
        dt: time step; defaults to spacing / h.
        tol: sup-norm sweep change for convergence; defaults to
            1e-10 * max(1, 1/delta).
        max_iter: maximal number of sweep cycles.
        velocity_bound: overrides the Hamiltonian's h.
    """

    nodes: int = 2001
    spacing: float | None = None
    velocities: int = 21
    dt: float | None = None
    tol: float | None = None
    max_iter: int = 20000
    velocity_bound: float | None = None

    def __post_init__(self):
        if self.velocities < 3 or self.velocities % 2 == 0:
            raise ValidationError("velocity count M must be odd and >= 3")
        if self.dt is not None and not self.dt > 0:
            raise ValidationError("dt must be positive")
        if self.tol is not None and not self.tol > 0:
            raise ValidationError("tol must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")

    def grid_for(self, sdom: ScaledDomain) -> Grid:
        if self.spacing is not None:
            return build_grid(sdom, target_spacing=self.spacing)
        if sdom.dim == 2:
            return build_grid(sdom, target_spacing=sdom.diameter / (self.nodes - 1))
        return build_grid(sdom, nodes=self.nodes)


@dataclass(frozen=True, eq=False)
class ValueFunction:
    """Grid-sampled solution with metadata."""

    grid: Grid
    values: np.ndarray
    delta: float
    iterations: int = 0
    final_change: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def s(self) -> float:
        return self.grid.domain.s

    def __call__(self, points) -> np.ndarray:
        return self.grid.interpolate(self.values, points)


@dataclass(frozen=True)
class FailedSolve:
    """Failure marker inside a batch; carries the same metadata as a solve."""

    meta: dict
    error: str


def velocity_grid(dim: int, h: float, m: int) -> np.ndarray:
    axis = np.linspace(-h, h, m)
    axis[m // 2] = 0.0
    if dim == 1:
        return axis[:, None]
    a, b = np.meshgrid(axis, axis, indexing="ij")
    v = np.stack([a.ravel(), b.ravel()], axis=-1)
    return v[np.hypot(v[:, 0], v[:, 1]) <= h * (1 + 1e-12)]


@dataclass(frozen=True, eq=False)
class Discretization:
    """Per-(H, grid, cfg) tables reused across discount factors."""

    grid: Grid
    dt: float
    h: float
    velocities: np.ndarray
    opt_ptr: np.ndarray
    opt_idx: np.ndarray
    opt_w: np.ndarray
    opt_cost: np.ndarray
    opt_vel: np.ndarray
    stay_cost: np.ndarray
    orders: np.ndarray


def discretize(H: HamiltonianSpec, grid: Grid, cfg: SolveConfig) -> Discretization:
    """Admissible (node, velocity) options with stencils and running costs.

    Raises:
        EmptyAdmissibleSetError: some node has no admissible velocity.
    """
    if grid.dim != H.dim:
        raise ValidationError("grid and Hamiltonian dimensions differ")
    h = cfg.velocity_bound if cfg.velocity_bound is not None else H.velocity_bound
    dt = cfg.dt if cfg.dt is not None else grid.spacing / h
    vel = velocity_grid(grid.dim, h, cfg.velocities)
    n, m = grid.size, vel.shape[0]
    L = H.lagrangian(grid.nodes[:, None, :], vel[None, :, :])
    feet = grid.nodes[:, None, :] + dt * vel[None, :, :]
    inside = grid.domain.contains(feet.reshape(-1, grid.dim)).reshape(n, m)
    ok = inside & np.isfinite(L)
    # v = 0 at a node is its own foot point
    zero = int(np.flatnonzero(np.all(vel == 0, axis=1))[0])
    ok[:, zero] = np.isfinite(L[:, zero])
    ii, jj = np.nonzero(ok)
    idx, w, found = grid.stencil(feet[ii, jj])
    keep = found | (jj == zero)
    ii, jj, idx, w = ii[keep], jj[keep], idx[keep], w[keep]
    selfmask = jj == zero
    idx[selfmask] = ii[selfmask, None]
    w[selfmask] = 0.0
    w[selfmask, 0] = 1.0
    counts = np.bincount(ii, minlength=n)
    if np.any(counts == 0):
        bad = int(np.flatnonzero(counts == 0)[0])
        raise EmptyAdmissibleSetError(
            f"no admissible velocity at node {bad} (x = {grid.nodes[bad].tolist()})"
        )
    ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    stay = np.where(np.isfinite(L[:, zero]), L[:, zero], np.nan)
    return Discretization(
        grid=grid,
        dt=float(dt),
        h=float(h),
        velocities=vel,
        opt_ptr=ptr,
        opt_idx=np.ascontiguousarray(idx, dtype=np.int64),
        opt_w=np.ascontiguousarray(w, dtype=float),
        opt_cost=np.ascontiguousarray(dt * L[ii, jj], dtype=float),
        opt_vel=jj.astype(np.int64),
        stay_cost=stay,
        orders=_sweep_orders(grid),
    )


def _sweep_orders(grid: Grid) -> np.ndarray:
    if grid.dim == 1:
        fwd = np.argsort(grid.x, kind="stable")
        return np.stack([fwd, fwd[::-1]]).astype(np.int64)
    x, y = grid.nodes[:, 0], grid.nodes[:, 1]
    orders = [np.lexsort((sy * y, sx * x)) for sx, sy in ((1, 1), (-1, -1), (1, -1), (-1, 1))]
    return np.stack(orders).astype(np.int64)


@njit(cache=True, nogil=True)
def _gs_kernel(u, ptr, idx, w, cost, orders, ddt, tol, max_iter):
    # (beta*acc + cost) / (1 - beta*w_self) with beta = 1/(1+ddt), rearranged
    # so that 1 - beta is never formed (it cancels badly for tiny discounts)
    grow = 1.0 + ddt
    n_orders, n = orders.shape
    width = idx.shape[1]
    change = np.inf
    for it in range(max_iter):
        change = 0.0
        for o in range(n_orders):
            for t in range(n):
                i = orders[o, t]
                best = np.inf
                for k in range(ptr[i], ptr[i + 1]):
                    self_w = 0.0
                    acc = 0.0
                    for q in range(width):
                        wq = w[k, q]
                        if wq == 0.0:
                            continue
                        j = idx[k, q]
                        if j == i:
                            self_w += wq
                        else:
                            acc += wq * u[j]
                    val = (acc + grow * cost[k]) / ((1.0 - self_w) + ddt)
                    if val < best:
                        best = val
                d = abs(best - u[i])
                if d > change:
                    change = d
                u[i] = best
        if change <= tol:
            return it + 1, change
    return -max_iter, change


def solve_discounted(
    H: HamiltonianSpec,
    sdom: ScaledDomain | StarDomain,
    delta: float,
    cfg: SolveConfig | None = None,
    disc: Discretization | None = None,
    init: np.ndarray | None = None,
) -> ValueFunction:
    """Solve delta u + H(x, Du) = 0 with state constraints on ``sdom``.

    Args:
        H: the Hamiltonian.
        sdom: scaled domain (a bare StarDomain means scale factor 1).
        delta: discount, > 0.
        cfg: discretization; defaults to ``SolveConfig()``.
        disc: precomputed tables for this grid, reused across calls.
        init: optional starting values (any values work; an upper bound is fastest).

    Raises:
        ValidationError: delta <= 0.
        NonConvergenceError: sweeps did not settle within ``cfg.max_iter``.
        EmptyAdmissibleSetError: see :func:`discretize`.
    """
    if not (delta > 0 and math.isfinite(delta)):
        raise ValidationError(f"discount must be positive, got {delta}")
    cfg = cfg or SolveConfig()
    if isinstance(sdom, StarDomain):
        sdom = scale(sdom, 0.0)
    if disc is None:
        disc = discretize(H, cfg.grid_for(sdom), cfg)
    tol = cfg.tol if cfg.tol is not None else 1e-10 * max(1.0, 1.0 / delta)
    stay = disc.stay_cost * (1.0 + delta * disc.dt) / delta
    if init is None:
        fallback = np.nanmax(stay) if np.any(np.isfinite(stay)) else 0.0
        u = np.where(np.isfinite(stay), stay, fallback).astype(float)
    else:
        u = np.array(init, dtype=float)
    its, change = _gs_kernel(
        u, disc.opt_ptr, disc.opt_idx, disc.opt_w, disc.opt_cost, disc.orders, delta * disc.dt, tol, cfg.max_iter
    )
    if its < 0:
        raise NonConvergenceError(
            f"no convergence after {cfg.max_iter} sweep cycles (last change {change:.3e}, delta {delta:g})"
        )
    return ValueFunction(
        disc.grid,
        u,
        float(delta),
        int(its),
        float(change),
        {"dt": disc.dt, "h": disc.h, "s": disc.grid.domain.s, "r": disc.grid.domain.r},
    )


def pull_back(u: ValueFunction, base_grid: Grid) -> np.ndarray:
    """x -> u((1+r) x) on the base grid."""
    pts = u.s * base_grid.nodes
    inside = u.grid.domain.contains(pts, tol=1e-9)
    if not np.all(inside):
        warnings.warn("points outside the scaled domain were clamped", RuntimeWarning, stacklevel=2)
    return u.grid.interpolate(u.values, pts)


def rescale_value(u: ValueFunction, base_grid: Grid | None = None) -> ValueFunction:
    """ũ(x) = u((1+r) x) / (1+r) on the base grid.

    Points falling outside the scaled domain are clamped onto it with a
    warning.
    """
    if not abs(u.s - 1.0) < 1.0:
        raise ValidationError("rescaling needs |r| < 1")
    if base_grid is None:
        base = scale(u.grid.domain.base, 0.0)
        if u.grid.dim == 1:
            base_grid = build_grid(base, nodes=u.grid.size)
        else:
            base_grid = build_grid(base, target_spacing=u.grid.spacing / u.s)
    vals = pull_back(u, base_grid) / u.s
    return ValueFunction(base_grid, vals, u.delta, u.iterations, u.final_change, dict(u.meta, rescaled=True))


def lipschitz_constant(u: ValueFunction) -> float:
    """Largest difference quotient between grid neighbours."""
    g = u.grid
    if g.dim == 1:
        return float(np.max(np.abs(np.diff(u.values)) / np.diff(g.x)))
    from scipy.spatial import cKDTree

    pairs = cKDTree(g.nodes).query_pairs(1.5 * g.spacing, output_type="ndarray")
    d = np.hypot(*(g.nodes[pairs[:, 0]] - g.nodes[pairs[:, 1]]).T)
    return float(np.max(np.abs(u.values[pairs[:, 0]] - u.values[pairs[:, 1]]) / d))


def _argmin_p(H: HamiltonianSpec, x: np.ndarray) -> np.ndarray:
    if H.kind in ("eikonal", "tilted", "quadratic"):
        return np.zeros(x.shape[0])
    big = H.lipschitz_estimate + 1.0
    return _golden_min_1d(H, x, np.full(x.shape[0], -big), np.full(x.shape[0], big))[1]


def _golden_min_1d(H, x, lo, hi, iters: int = 80):
    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo.astype(float).copy(), hi.astype(float).copy()

    def f(p):
        return H.H(x, p[:, None])

    for _ in range(iters):
        c = b - g * (b - a)
        d = a + g * (b - a)
        left = f(c) <= f(d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    p = 0.5 * (a + b)
    return f(p), p


def _min_on(H, x, lo, hi):
    """min of the convex map p -> H(x, p) over [lo, hi] (ends may be infinite)."""
    pstar = _argmin_p(H, x)
    p = np.clip(pstar, lo, hi)
    return H.H(x, p[:, None])


def residual_check(u: ValueFunction, H: HamiltonianSpec, delta: float) -> tuple[float, float]:
    """Viscosity residuals from one-sided difference quotients.

    Returns:
        (subsolution violation at interior nodes, supersolution violation at
        all nodes). In 1D the boundary nodes use the half-line
        subdifferentials of the state-constraint problem. In 2D only interior
        lattice nodes with four lattice neighbours are tested.
    """
    vals = np.asarray(u.values, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValidationError("residual check needs finite values")
    if u.grid.dim == 2:
        return _residual_2d(u, H, delta)
    x = u.grid.x
    dx = np.diff(x)
    slope = np.diff(vals) / dx
    n = x.size
    a = np.concatenate([[np.nan], slope])
    b = np.concatenate([slope, [np.nan]])
    xi = x[:, None]
    du = delta * vals
    sub = np.zeros(n)
    sup = np.zeros(n)
    inner = np.arange(1, n - 1)
    ai, bi = a[inner], b[inner]
    Ha = H.H(xi[inner], ai[:, None])
    Hb = H.H(xi[inner], bi[:, None])
    hmax = np.maximum(Ha, Hb)
    hmin = _min_on(H, xi[inner], np.minimum(ai, bi), np.maximum(ai, bi))
    concave = ai >= bi
    sub[inner] = np.maximum(du[inner] + np.where(concave, hmax, hmin), 0.0)
    convex = ai <= bi
    sup[inner] = np.maximum(-(du[inner] + np.where(convex, hmin, hmax)), 0.0)
    # closure: D^- u(left end) = (-inf, b], D^- u(right end) = [a, inf)
    left = _min_on(H, xi[:1], np.array([-np.inf]), b[:1])
    right = _min_on(H, xi[-1:], a[-1:], np.array([np.inf]))
    sup[0] = max(-(du[0] + left[0]), 0.0)
    sup[-1] = max(-(du[-1] + right[0]), 0.0)
    return float(np.max(sub)), float(np.max(sup))


def _residual_2d(u: ValueFunction, H: HamiltonianSpec, delta: float) -> tuple[float, float]:
    g = u.grid
    vals = u.values
    h = g.spacing
    lookup = {tuple(l): k for k, l in enumerate(g.lattice) if not g.boundary[k]}
    sub_v, sup_v = 0.0, 0.0
    t = np.linspace(0.0, 1.0, 5)
    for k, l in enumerate(g.lattice):
        if g.boundary[k]:
            continue
        nb = [lookup.get((l[0] + dx, l[1] + dy)) for dx, dy in ((-1, 0), (1, 0), (0, -1), (0, 1))]
        if any(j is None for j in nb):
            continue
        ax, bx = (vals[k] - vals[nb[0]]) / h, (vals[nb[1]] - vals[k]) / h
        ay, by = (vals[k] - vals[nb[2]]) / h, (vals[nb[3]] - vals[k]) / h
        x = g.nodes[k][None, :]
        corners = np.array([[ax, ay], [ax, by], [bx, ay], [bx, by]])
        hmax = float(np.max(H.H(x, corners)))
        px = min(ax, bx) + t * abs(bx - ax)
        py = min(ay, by) + t * abs(by - ay)
        P, Q = np.meshgrid(px, py, indexing="ij")
        hmin = float(np.min(H.H(x, np.stack([P.ravel(), Q.ravel()], axis=-1))))
        du = delta * vals[k]
        concave = ax >= bx or ay >= by
        sub_v = max(sub_v, du + (hmax if concave else hmin))
        convex = ax <= bx and ay <= by
        sup_v = max(sup_v, -(du + (hmin if convex else hmax)))
    return max(sub_v, 0.0), max(sup_v, 0.0)


def solve_state_constraint_family(
    H: HamiltonianSpec,
    dom: StarDomain,
    phi: Callable[[float], float],
    r: Callable[[float], float],
    lambdas: Sequence[float],
    cfg: SolveConfig | None = None,
    threads: int = 1,
) -> list[ValueFunction | FailedSolve]:
    """Solve phi(lam) u + H(x, Du) = 0 on (1 + r(lam)) dom for each lam.

    Failures are returned as :class:`FailedSolve` markers; the batch goes on.
    """
    cfg = cfg or SolveConfig()
    lams = [float(l) for l in lambdas]
    for lam in lams:
        if not phi(lam) > 0:
            raise ValidationError(f"phi({lam}) must be positive")

    def one(lam: float):
        meta = {"lambda": lam, "r": float(r(lam)), "phi": float(phi(lam))}
        try:
            sdom = scale(dom, meta["r"])
            vf = solve_discounted(H, sdom, meta["phi"], cfg)
        except HJError as exc:
            return FailedSolve(meta, f"{type(exc).__name__}: {exc}")
        return replace(vf, meta=dict(vf.meta, **meta))

    if threads == 1 or len(lams) < 2:
        return [one(l) for l in lams]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, lams))
