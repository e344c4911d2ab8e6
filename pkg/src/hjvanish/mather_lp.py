"""Occupation-measure linear programs for Mather measures.

The discrete measure lives on (state node, velocity node) pairs. Constraints
are unit mass and holonomy against Chebyshev test functions:

    sum_ij mu_ij v_j . D psi_k(x_i) = 0,    k = 1..K.

The stage-1 minimum of <mu, L> approximates -c(0). Stage 2 restricts to the
optimal face and minimizes / maximizes <mu, g> with g = (-x) . D_xL, which
brackets the one-sided derivatives of c at r = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial import chebyshev as C

from .domains import Grid, ScaledDomain, StarDomain, build_grid, scale
from .errors import LPInfeasibleError, ValidationError
from .hamiltonians import HamiltonianSpec
from .hj_solver import velocity_grid
from .simplex import SimplexResult, simplex

__all__ = [
    "LPInstance",
    "OccupationMeasure",
    "ExpansionBounds",
    "build_lp",
    "solve_mather",
    "expansion_bounds",
    "measure_pairing",
    "write_lp",
    "read_lp",
]


def _cheb(k: int, t: np.ndarray, deriv: bool = False) -> np.ndarray:
    coef = np.zeros(k + 1)
    coef[k] = 1.0
    if deriv:
        coef = C.chebder(coef)
    return C.chebval(t, coef)


def _test_gradients(nodes: np.ndarray, K: int, R: float) -> np.ndarray:
    """D psi_k at the nodes, shape (n_tests, n_nodes, dim)."""
    t = nodes / R
    if nodes.shape[1] == 1:
        return np.stack([(_cheb(k, t[:, 0], True) / R)[:, None] for k in range(1, K + 1)])
    out = []
    for total in range(1, K + 1):
        for j in range(total, -1, -1):
            k = total - j
            Tx, Ty = _cheb(j, t[:, 0]), _cheb(k, t[:, 1])
            dTx, dTy = _cheb(j, t[:, 0], True) / R, _cheb(k, t[:, 1], True) / R
            out.append(np.stack([dTx * Ty, Tx * dTy], axis=-1))
    return np.stack(out)


@dataclass(frozen=True, eq=False)
class LPInstance:
    """Equality-form LP over admissible (node, velocity) columns.

    Row 0 is the mass constraint, rows 1..K holonomy. ``holonomy_raw`` keeps
    the unnormalized holonomy rows for residual reporting; the solver uses
    rows scaled to unit max-norm.
    """

    grid: Grid
    velocities: np.ndarray
    K: int
    states: np.ndarray
    vels: np.ndarray
    cost: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    holonomy_raw: np.ndarray
    g: np.ndarray
    dropped: int = 0

    @property
    def columns(self) -> int:
        return self.cost.size


@dataclass(frozen=True, eq=False)
class OccupationMeasure:
    weights: np.ndarray
    states: np.ndarray
    vels: np.ndarray
    nodes: np.ndarray
    velocities: np.ndarray
    value: float
    holonomy_residual: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    def support(self, tol: float = 1e-12) -> list[tuple[tuple[float, ...], tuple[float, ...], float]]:
        k = np.flatnonzero(self.weights > tol)
        return [
            (tuple(self.nodes[self.states[i]].tolist()), tuple(self.velocities[self.vels[i]].tolist()), float(self.weights[i]))
            for i in k
        ]


@dataclass(frozen=True)
class ExpansionBounds:
    c1_minus: float
    c1_plus: float
    value: float
    eps_pin: float
    face_columns: int
    available: bool = True
    note: str = ""


def build_lp(
    H: HamiltonianSpec,
    sdom: ScaledDomain | StarDomain,
    grid: Grid | None = None,
    velocities: int | np.ndarray = 21,
    K: int = 12,
    nodes: int = 101,
) -> LPInstance:
    """Assemble the occupation-measure LP; infinite-L columns are dropped."""
    if K < 0:
        raise ValidationError("test basis size K must be >= 0")
    if isinstance(sdom, StarDomain):
        sdom = scale(sdom, 0.0)
    if grid is None:
        grid = build_grid(sdom, nodes=nodes) if sdom.dim == 1 else build_grid(sdom, target_spacing=sdom.diameter / (nodes - 1))
    vel = velocity_grid(H.dim, H.velocity_bound, velocities) if np.isscalar(velocities) else np.asarray(velocities, dtype=float).reshape(-1, H.dim)
    if grid.size == 0 or vel.shape[0] == 0:
        raise ValidationError("empty grid or velocity set")
    L = H.lagrangian(grid.nodes[:, None, :], vel[None, :, :])
    ii, jj = np.nonzero(np.isfinite(L))
    if ii.size == 0:
        raise LPInfeasibleError("every column has infinite cost")
    cost = L[ii, jj]
    with np.errstate(invalid="ignore", over="ignore"):
        g = H.g(grid.nodes[ii], vel[jj])
    R = float(np.max(np.abs(grid.nodes))) or 1.0
    if K:
        dpsi = _test_gradients(grid.nodes, K, R)
        raw = np.einsum("knd,cd->kc", dpsi[:, ii, :], vel[jj])
    else:
        raw = np.zeros((0, ii.size))
    scaled = raw / np.maximum(np.max(np.abs(raw), axis=1, keepdims=True), 1e-300)
    A = np.vstack([np.ones((1, ii.size)), scaled])
    b = np.zeros(A.shape[0])
    b[0] = 1.0
    return LPInstance(grid, vel, raw.shape[0], ii, jj, cost, A, b, raw, g, int(L.size - ii.size))


def _measure(lp: LPInstance, x: np.ndarray) -> OccupationMeasure:
    return OccupationMeasure(
        weights=x,
        states=lp.states,
        vels=lp.vels,
        nodes=lp.grid.nodes,
        velocities=lp.velocities,
        value=float(lp.cost @ x),
        holonomy_residual=lp.holonomy_raw @ x,
    )


def solve_mather(lp: LPInstance, return_result: bool = False):
    """Minimize <mu, L>. Returns (value, OccupationMeasure) [, SimplexResult]."""
    res = simplex(lp.cost, lp.A_eq, lp.b_eq)
    mu = _measure(lp, res.x)
    if return_result:
        return mu.value, mu, res
    return mu.value, mu


def expansion_bounds(
    lp: LPInstance,
    g: np.ndarray | None = None,
    value: float | None = None,
    eps_pin: float | None = None,
    face_tol: float = 1e-9,
) -> ExpansionBounds:
    """(min, max) of <mu, g> over the approximate optimal face.

    Stage 2 keeps the columns whose stage-1 reduced cost is at most
    ``face_tol`` and adds the pin row <mu, L> <= value + eps_pin with
    eps_pin = 1e-7 (1 + |value|) by default.

    Raises:
        LPInfeasibleError: the pinned stage-2 problem is infeasible.
    """
    g = lp.g if g is None else np.asarray(g, dtype=float)
    v1, _, res = solve_mather(lp, return_result=True)
    if value is None:
        value = v1
    if eps_pin is None:
        eps_pin = 1e-7 * (1.0 + abs(value))
    face = np.flatnonzero(res.reduced_costs <= face_tol)
    finite = face[np.isfinite(g[face])]
    note = ""
    if finite.size < face.size:
        note = "optimal face contains columns with infinite g"
    if finite.size == 0:
        return ExpansionBounds(np.inf, np.inf, float(value), float(eps_pin), int(face.size), False, note)
    A = lp.A_eq[:, finite]
    pin = np.concatenate([lp.cost[finite], [1.0]])
    A2 = np.vstack([np.hstack([A, np.zeros((A.shape[0], 1))]), pin])
    b2 = np.concatenate([lp.b_eq, [value + eps_pin]])
    gf = np.concatenate([g[finite], [0.0]])
    try:
        lo = simplex(gf, A2, b2)
        hi = simplex(-gf, A2, b2)
    except LPInfeasibleError as exc:
        raise LPInfeasibleError(f"pinned stage-2 LP infeasible (eps_pin = {eps_pin:g}): {exc}") from None
    c1m = float(gf @ lo.x)
    c1p = float(gf @ hi.x)
    if finite.size < face.size:
        c1p = np.inf
    return ExpansionBounds(c1m, c1p, float(value), float(eps_pin), int(face.size), finite.size == face.size, note)


def measure_pairing(mu: OccupationMeasure, f) -> float:
    """<mu, f> for f sampled on states (N,), on states x velocities (N, M),
    or given as a callable f(x, v)."""
    if callable(f):
        vals = np.asarray(f(mu.nodes[mu.states], mu.velocities[mu.vels]), dtype=float)
        return float(mu.weights @ vals)
    arr = np.asarray(f, dtype=float)
    n, m = mu.nodes.shape[0], mu.velocities.shape[0]
    if arr.shape == (n,):
        vals = arr[mu.states]
    elif arr.shape == (n, m):
        vals = arr[mu.states, mu.vels]
    else:
        raise ValidationError(f"pairing needs shape ({n},) or ({n}, {m}), got {arr.shape}")
    support = mu.weights > 0
    if not np.all(np.isfinite(vals[support])):
        raise ValidationError("f is not finite on the support of the measure")
    return float(mu.weights[support] @ vals[support])


def write_lp(lp: LPInstance, path: str | Path) -> None:
    """Plain-text dump: 'hjvanish-lp 1', 'dims m n', 'obj' + n costs, then one
    'eq <rhs>' line per row followed by its n coefficients, then 'end'."""
    path = Path(path)
    m, n = lp.A_eq.shape
    lines = ["hjvanish-lp 1", f"dims {m} {n}", "obj " + " ".join(f"{v:.17g}" for v in lp.cost)]
    for k in range(m):
        lines.append(f"eq {lp.b_eq[k]:.17g} " + " ".join(f"{v:.17g}" for v in lp.A_eq[k]))
    lines.append("end")
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write LP dump {path}: {exc}") from exc


def read_lp(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`write_lp`: returns (cost, A_eq, b_eq)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "hjvanish-lp 1":
        raise ValidationError("not an hjvanish LP dump")
    _, m, n = lines[1].split()
    m, n = int(m), int(n)
    cost = np.array(lines[2].split()[1:], dtype=float)
    A = np.empty((m, n))
    b = np.empty(m)
    for k in range(m):
        parts = lines[3 + k].split()
        b[k] = float(parts[1])
        A[k] = np.array(parts[2:], dtype=float)
    return cost, A, b
