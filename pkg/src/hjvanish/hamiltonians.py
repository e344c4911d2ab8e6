"""Convex coercive Hamiltonians H(x, p) and their Lagrangians L(x, v).

Four kinds are supported:

* ``eikonal``   H = |p| - V(x), L = V(x) for |v| <= 1 and +inf otherwise.
* ``tilted``    H = |p| + b.x, i.e. the eikonal kind with V(x) = -b.x.
* ``quadratic`` H = |p|^2/2 + W(x), L = |v|^2/2 - W(x).
* ``tabulated`` any convex coercive callable H; L is computed numerically.

Points are arrays whose trailing axis has length ``dim``. In one dimension a
scalar or a flat array of abscissae is accepted as well.

+inf in L is represented by ``numpy.inf`` (:data:`INF`). Every consumer tests
``np.isfinite`` before doing arithmetic with L.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    AmbientOverflowError,
    InfiniteLagrangianError,
    KindMismatchError,
    ValidationError,
)

__all__ = [
    "INF",
    "KINDS",
    "Potential",
    "HamiltonianSpec",
    "as_points",
    "potential_from_id",
    "potential_from_table",
    "eikonal",
    "tilted",
    "quadratic",
    "tabulated",
    "power_hamiltonian",
    "estimate_lipschitz",
    "legendre_transform",
    "dx_lagrangian",
    "scaled_weight",
    "scaled_lagrangian_difference",
]

INF = np.inf
KINDS = ("eikonal", "tilted", "quadratic", "tabulated")

_P_GRID_POINTS = 257
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def as_points(x, dim: int) -> np.ndarray:
    """Return ``x`` as a float array of shape (..., dim)."""
    arr = np.asarray(x, dtype=float)
    if dim == 1:
        if arr.ndim == 0 or arr.shape[-1] != 1:
            arr = arr[..., None]
        return arr
    if arr.shape[-1:] != (dim,):
        raise ValidationError(f"expected points with trailing axis {dim}, got shape {arr.shape}")
    return arr


def _norm(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(x * x, axis=-1))


def _central_gradient(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    # step 1e-6 (1 + |x|) per point
    step = 1e-6 * (1.0 + _norm(x))
    grads = []
    for k in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[k] = 1.0
        hk = step[..., None] * e
        grads.append((f(x + hk) - f(x - hk)) / (2.0 * step))
    return np.stack(grads, axis=-1)


@dataclass(frozen=True)
class Potential:
    """Scalar field on the ambient ball with an optional analytic gradient.

    ``func`` maps points of shape (..., n) to values of shape (...);
    ``grad`` maps them to (..., n). Without ``grad`` central differences
    are used.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    breakpoints: tuple[float, ...] = ()

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.func(x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        if self.grad is not None:
            return self.grad(x)
        return _central_gradient(self.func, x)


def _radial_unit(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r = _norm(x)
    safe = np.where(r > 0, r, 1.0)
    return r, np.where(r[..., None] > 0, x / safe[..., None], 0.0)


def _exp_abs() -> Potential:
    def f(x):
        return np.exp(-_norm(x))

    def g(x):
        r, e = _radial_unit(x)
        return -e * np.exp(-r)[..., None]

    return Potential("exp_abs", f, g)


def _sqrt_edge() -> Potential:
    def f(x):
        return np.sqrt(np.maximum(1.0 - _norm(x), 0.0))

    def g(x):
        r, e = _radial_unit(x)
        s = np.sqrt(np.maximum(1.0 - r, 0.0))
        with np.errstate(divide="ignore"):
            mag = np.where(s > 0, 0.5 / np.where(s > 0, s, 1.0), INF)
        out = -e * mag[..., None]
        return np.where(r[..., None] > 0, out, 0.0)

    return Potential("sqrt_edge", f, g)


def _square() -> Potential:
    return Potential("square", lambda x: np.sum(x * x, axis=-1), lambda x: 2.0 * x)


def _zero() -> Potential:
    return Potential("zero", lambda x: np.zeros(x.shape[:-1]), lambda x: np.zeros_like(x))


def _plateau(width: float = 0.2) -> Potential:
    def f(x):
        return np.maximum(_norm(x) - width, 0.0) ** 2

    def g(x):
        r, e = _radial_unit(x)
        return 2.0 * np.maximum(r - width, 0.0)[..., None] * e

    return Potential("plateau", f, g)


def _linear() -> Potential:
    def g(x):
        out = np.zeros_like(x)
        out[..., 0] = 1.0
        return out

    return Potential("linear", lambda x: np.array(x[..., 0], dtype=float), g)


_POTENTIALS: dict[str, Callable[[], Potential]] = {
    "exp_abs": _exp_abs,
    "sqrt_edge": _sqrt_edge,
    "square": _square,
    "zero": _zero,
    "plateau": _plateau,
    "linear": _linear,
}


def potential_from_id(name: str) -> Potential:
    """Built-in potentials by expression id.

    ``exp_abs`` e^{-|x|}, ``sqrt_edge`` sqrt(1-|x|), ``square`` |x|^2,
    ``zero``, ``plateau`` (|x|-0.2)_+^2, ``linear`` x_1.
    """
    try:
        return _POTENTIALS[name]()
    except KeyError:
        raise ValidationError(
            f"unknown potential id {name!r}; known: {', '.join(sorted(_POTENTIALS))}"
        ) from None


def potential_from_table(
    xs, values, gradients=None, name: str = "table"
) -> Potential:
    """Piecewise-linear 1D potential through the samples (constant extension)."""
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    if xs.ndim != 1 or xs.shape != values.shape or xs.size < 2:
        raise ValidationError("potential table needs matching 1D x and value columns, >= 2 rows")
    if np.any(np.diff(xs) <= 0):
        raise ValidationError("potential table abscissae must be strictly increasing")
    if not np.all(np.isfinite(values)):
        raise ValidationError("potential table contains non-finite values")

    def f(x):
        return np.interp(x[..., 0], xs, values)

    if gradients is not None:
        gradients = np.asarray(gradients, dtype=float)

        def g(x):
            return np.interp(x[..., 0], xs, gradients)[..., None]

    else:
        slopes = np.diff(values) / np.diff(xs)

        def g(x):
            k = np.clip(np.searchsorted(xs, x[..., 0], side="right") - 1, 0, slopes.size - 1)
            inside = (x[..., 0] >= xs[0]) & (x[..., 0] <= xs[-1])
            return np.where(inside, slopes[k], 0.0)[..., None]

    return Potential(name, f, g, breakpoints=tuple(xs.tolist()))


@dataclass(frozen=True)
class HamiltonianSpec:
    """A convex, coercive Hamiltonian together with its Lagrangian view.

    Attributes:
        kind: one of :data:`KINDS`.
        dim: spatial dimension (1 or 2).
        potential: V for the eikonal kinds, W for the quadratic kind.
        velocity_bound: effective cap h on |v|.
        lipschitz_estimate: empirical a-priori constant C_H.
        ambient_radius: R0 of the ambient ball U.
        hfunc: H(x, p) for the tabulated kind.
        tilt: b for the tilted kind.
        jointly_convex: (x, p) -> H(x, p) is convex.
    """

    kind: str
    dim: int
    potential: Potential
    velocity_bound: float
    lipschitz_estimate: float
    ambient_radius: float = 2.0
    hfunc: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    tilt: tuple[float, ...] | None = None
    jointly_convex: bool = False
    label: str = ""

    @property
    def is_eikonal_type(self) -> bool:
        return self.kind in ("eikonal", "tilted")

    def H(self, x, p) -> np.ndarray:
        x = as_points(x, self.dim)
        p = as_points(p, self.dim)
        if self.is_eikonal_type:
            return _norm(p) - self.potential(x)
        if self.kind == "quadratic":
            return 0.5 * np.sum(p * p, axis=-1) + self.potential(x)
        return self.hfunc(x, p)

    def lagrangian(self, x, v) -> np.ndarray:
        """L(x, v) without range checks, broadcasting x against v."""
        x = as_points(x, self.dim)
        v = as_points(v, self.dim)
        if self.is_eikonal_type:
            vals = self.potential(x)
            return np.where(_norm(v) <= 1.0 + 1e-12, vals, INF)
        if self.kind == "quadratic":
            return 0.5 * np.sum(v * v, axis=-1) - self.potential(x)
        return _numeric_legendre(self.hfunc, x, v, self.velocity_bound)

    def dx_lagrangian(self, x, v) -> np.ndarray:
        x = as_points(x, self.dim)
        v = as_points(v, self.dim)
        shape = np.broadcast_shapes(x.shape, v.shape)
        if self.is_eikonal_type:
            return np.broadcast_to(self.potential.gradient(x), shape).copy()
        if self.kind == "quadratic":
            return np.broadcast_to(-self.potential.gradient(x), shape).copy()
        x = np.broadcast_to(x, shape)
        return _central_gradient(lambda y: self.lagrangian(y, v), x)

    def g(self, x, v) -> np.ndarray:
        """Scaled weight (-x) . D_xL(x, v)."""
        x = as_points(x, self.dim)
        d = self.dx_lagrangian(x, v)
        with np.errstate(invalid="ignore"):
            out = -np.sum(np.broadcast_to(x, d.shape) * d, axis=-1)
        # 0 * inf at the origin is 0, not nan
        return np.where(np.all(np.broadcast_to(x, d.shape) == 0, axis=-1), 0.0, out)


def _golden_max(f: Callable[[np.ndarray], np.ndarray], a: np.ndarray, b: np.ndarray, iters: int = 80):
    for _ in range(iters):
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        left = f(c) >= f(d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    return f(0.5 * (a + b))


def _numeric_legendre(hfunc, x: np.ndarray, v: np.ndarray, h: float) -> np.ndarray:
    shape = np.broadcast_shapes(x.shape[:-1], v.shape[:-1])
    n = x.shape[-1]
    xf = np.broadcast_to(x, shape + (n,)).reshape(-1, n)
    vf = np.broadcast_to(v, shape + (n,)).reshape(-1, n)
    out = np.empty(xf.shape[0])
    chunk = 2048 if n == 1 else 16
    for s in range(0, xf.shape[0], chunk):
        out[s : s + chunk] = _legendre_rows(hfunc, xf[s : s + chunk], vf[s : s + chunk], h)
    return out.reshape(shape)


def _legendre_rows(hfunc, x: np.ndarray, v: np.ndarray, h: float) -> np.ndarray:
    n = x.shape[-1]
    rows = x.shape[0]
    result = np.full(rows, np.nan)
    todo = np.arange(rows)
    P = 2.0 * (h + 1.0)
    for doubling in range(7):
        xs, vs = x[todo], v[todo]
        axis = np.linspace(-P, P, _P_GRID_POINTS)
        if n == 1:
            pg = axis[:, None]
        else:
            a, b = np.meshgrid(axis, axis, indexing="ij")
            pg = np.stack([a.ravel(), b.ravel()], axis=-1)
        obj = pg[None, :, :] @ vs[:, :, None]
        obj = obj[..., 0] - hfunc(xs[:, None, :], pg[None, :, :])
        k = np.argmax(obj, axis=1)
        best = obj[np.arange(todo.size), k]
        idx = np.unravel_index(k, (_P_GRID_POINTS,) * n)
        on_edge = np.zeros(todo.size, dtype=bool)
        for comp in idx:
            on_edge |= (comp == 0) | (comp == _P_GRID_POINTS - 1)
        # growth test: is the edge value still rising along the outward ray?
        inner = best.copy()
        if np.any(on_edge):
            pk = pg[k][on_edge]
            pin = pk * (1.0 - 1.0 / (_P_GRID_POINTS - 1))
            xi, vi = xs[on_edge], vs[on_edge]
            inner[on_edge] = np.sum(pin * vi, axis=-1) - hfunc(xi, pin)
        rising = on_edge & (best - inner > 1e-12 * (1.0 + np.abs(best)))
        done = ~rising
        if np.any(done):
            sel = np.flatnonzero(done)
            result[todo[sel]] = _refine(hfunc, xs[sel], vs[sel], pg[k[sel]], 2.0 * P / (_P_GRID_POINTS - 1))
        todo = todo[rising]
        if todo.size == 0:
            break
        P *= 2.0
    result[todo] = INF
    return result


def _refine(hfunc, x, v, p0, dp) -> np.ndarray:
    n = x.shape[-1]
    if n == 1:

        def f(p):
            return p * v[:, 0] - hfunc(x, p[:, None])

        return _golden_max(f, p0[:, 0] - dp, p0[:, 0] + dp)
    # coordinate ascent with golden sections; the objective is concave
    p = p0.copy()
    best = np.sum(p * v, axis=-1) - hfunc(x, p)
    for _ in range(6):
        for comp in range(n):
            def f(t, comp=comp):
                q = p.copy()
                q[:, comp] = t
                return np.sum(q * v, axis=-1) - hfunc(x, q)

            a = p[:, comp] - dp
            b = p[:, comp] + dp
            c = b - _GOLDEN * (b - a)
            d = a + _GOLDEN * (b - a)
            for _ in range(60):
                left = f(c) >= f(d)
                b = np.where(left, d, b)
                a = np.where(left, a, c)
                c = b - _GOLDEN * (b - a)
                d = a + _GOLDEN * (b - a)
            p[:, comp] = 0.5 * (a + b)
        best = np.maximum(best, np.sum(p * v, axis=-1) - hfunc(x, p))
    return best


def estimate_lipschitz(hfunc, dim: int, radius: float) -> float:
    """Empirical C_H = M0 + R for H on the ball of the given radius.

    M0 bounds |H(x, 0)| and |min_p H(x, p)|; R is the largest |p| with
    min_x H(x, p) <= M0. Any viscosity subsolution of dU + H = 0 with
    |dU| <= M0 then has gradients bounded by R.
    """
    if dim == 1:
        xs = np.linspace(-radius, radius, 401)[:, None]
        dirs = np.array([[1.0], [-1.0]])
        nr = 2001
    else:
        g = np.linspace(-radius, radius, 41)
        a, b = np.meshgrid(g, g, indexing="ij")
        xs = np.stack([a.ravel(), b.ravel()], axis=-1)
        xs = xs[_norm(xs) <= radius + 1e-12]
        th = np.linspace(0.0, 2 * np.pi, 16, endpoint=False)
        dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
        nr = 401
    h0 = hfunc(xs, np.zeros((1, dim)))
    a0 = float(np.max(np.abs(h0)))
    pmax = 10.0 * (1.0 + a0)
    for _ in range(30):
        mags = np.linspace(0.0, pmax, nr)
        ps = (mags[:, None, None] * dirs[None, :, :]).reshape(-1, dim)
        hv = hfunc(xs[:, None, :], ps[None, :, :])
        m0 = max(a0, float(np.max(np.abs(np.min(hv, axis=1)))))
        minx = np.min(hv, axis=0).reshape(nr, -1).min(axis=1)
        if minx[-1] > m0:
            below = np.flatnonzero(minx <= m0)
            return m0 + float(mags[below[-1]] if below.size else 0.0)
        pmax *= 2.0
    raise ValidationError("Hamiltonian does not look coercive on the sampled range")


def _make(kind, dim, potential, hfunc, ambient_radius, h, tilt=None, jointly_convex=False, label=""):
    if dim not in (1, 2):
        raise ValidationError("only dimensions 1 and 2 are supported")
    c_h = estimate_lipschitz(hfunc, dim, ambient_radius)
    if h is None:
        h = 1.0 if kind in ("eikonal", "tilted") else c_h + 1.0
    return HamiltonianSpec(
        kind=kind,
        dim=dim,
        potential=potential,
        velocity_bound=float(h),
        lipschitz_estimate=float(c_h),
        ambient_radius=float(ambient_radius),
        hfunc=hfunc,
        tilt=tilt,
        jointly_convex=jointly_convex,
        label=label or kind,
    )


def eikonal(V: Potential | str, dim: int = 1, ambient_radius: float = 2.0) -> HamiltonianSpec:
    """H(x, p) = |p| - V(x)."""
    V = potential_from_id(V) if isinstance(V, str) else V

    def hfunc(x, p):
        return _norm(p) - V(x)

    return _make("eikonal", dim, V, hfunc, ambient_radius, None, label=f"eikonal[{V.name}]")


def tilted(b, dim: int = 1, ambient_radius: float = 2.0) -> HamiltonianSpec:
    """H(x, p) = |p| + b.x, stored as the eikonal kind with V(x) = -b.x."""
    bvec = np.atleast_1d(np.asarray(b, dtype=float))
    if bvec.shape != (dim,):
        raise ValidationError(f"tilt must have {dim} components")
    V = Potential(
        "tilt",
        lambda x: -(x @ bvec),
        lambda x: np.broadcast_to(-bvec, x.shape).copy(),
    )

    def hfunc(x, p):
        return _norm(p) - V(x)

    return _make(
        "tilted", dim, V, hfunc, ambient_radius, None, tilt=tuple(bvec.tolist()),
        label=f"tilted[{','.join(f'{t:g}' for t in bvec)}]",
    )


def quadratic(
    W: Potential | str,
    dim: int = 1,
    ambient_radius: float = 2.0,
    jointly_convex: bool = False,
    velocity_bound: float | None = None,
) -> HamiltonianSpec:
    """H(x, p) = |p|^2/2 + W(x); jointly convex when W is convex."""
    W = potential_from_id(W) if isinstance(W, str) else W

    def hfunc(x, p):
        return 0.5 * np.sum(p * p, axis=-1) + W(x)

    return _make(
        "quadratic", dim, W, hfunc, ambient_radius, velocity_bound,
        jointly_convex=jointly_convex, label=f"quadratic[{W.name}]",
    )


def tabulated(
    hfunc: Callable[[np.ndarray, np.ndarray], np.ndarray],
    dim: int = 1,
    ambient_radius: float = 2.0,
    velocity_bound: float | None = None,
    potential: Potential | None = None,
    jointly_convex: bool = False,
    label: str = "tabulated",
) -> HamiltonianSpec:
    """Generic convex coercive H(x, p); L is computed by a numeric sup over p."""
    pot = potential if potential is not None else potential_from_id("zero")
    return _make(
        "tabulated", dim, pot, hfunc, ambient_radius, velocity_bound,
        jointly_convex=jointly_convex, label=label,
    )


def power_hamiltonian(
    q: float, W: Potential | str = "zero", dim: int = 1, ambient_radius: float = 2.0,
    velocity_bound: float | None = None,
) -> HamiltonianSpec:
    """Tabulated H(x, p) = |p|^q / q + W(x) with q > 1."""
    if not q > 1.0:
        raise ValidationError("power Hamiltonian needs q > 1")
    W = potential_from_id(W) if isinstance(W, str) else W

    def hfunc(x, p):
        return _norm(p) ** q / q + W(x)

    return tabulated(
        hfunc, dim, ambient_radius, velocity_bound, potential=W,
        label=f"power[{q:g},{W.name}]",
    )


def _check_ambient(H: HamiltonianSpec, x: np.ndarray) -> None:
    if np.any(_norm(x) > H.ambient_radius * (1.0 + 1e-12)):
        raise AmbientOverflowError(f"point outside the ambient ball of radius {H.ambient_radius}")


def legendre_transform(H: HamiltonianSpec, x, v) -> np.ndarray | float:
    """L(x, v) = sup_p (p.v - H(x, p)), with +inf where the sup is unbounded.

    Raises:
        ValidationError: if |v| exceeds the velocity bound.
        AmbientOverflowError: if x lies outside the ambient ball.
    """
    xp = as_points(x, H.dim)
    vp = as_points(v, H.dim)
    if np.any(_norm(vp) > H.velocity_bound * (1.0 + 1e-12)):
        raise ValidationError(f"|v| exceeds the velocity bound h = {H.velocity_bound}")
    _check_ambient(H, xp)
    out = H.lagrangian(xp, vp)
    return float(out) if np.ndim(out) == 0 else out


def dx_lagrangian(H: HamiltonianSpec, x, v) -> np.ndarray:
    """Spatial gradient D_xL(x, v); analytic where the kind allows it."""
    xp = as_points(x, H.dim)
    vp = as_points(v, H.dim)
    if not np.all(np.isfinite(H.lagrangian(xp, vp))):
        raise InfiniteLagrangianError("D_xL requested where L(x, v) = +inf")
    return H.dx_lagrangian(xp, vp)


def scaled_weight(H: HamiltonianSpec, x, v) -> np.ndarray | float:
    """g(x, v) = (-x) . D_xL(x, v)."""
    out = H.g(as_points(x, H.dim), as_points(v, H.dim))
    return float(out) if np.ndim(out) == 0 else out


def scaled_lagrangian_difference(H: HamiltonianSpec, x, v, delta: float, sign: int) -> np.ndarray | float:
    """[L(x, v) - L((1 + sign*delta) x, v)] / delta.

    Tends to sign * g(x, v) as delta -> 0 with first-order error.
    """
    if not 0.0 < delta < 0.5:
        raise ValidationError("delta must lie in (0, 0.5)")
    if sign not in (1, -1):
        raise ValidationError("sign must be +1 or -1")
    xp = as_points(x, H.dim)
    vp = as_points(v, H.dim)
    moved = (1.0 + sign * delta) * xp
    _check_ambient(H, xp)
    _check_ambient(H, moved)
    out = (H.lagrangian(xp, vp) - H.lagrangian(moved, vp)) / delta
    return float(out) if np.ndim(out) == 0 else out


def kind_check(H: HamiltonianSpec, *kinds: str) -> None:
    if H.kind not in kinds:
        raise KindMismatchError(f"operation needs kind in {kinds}, got {H.kind!r}")
