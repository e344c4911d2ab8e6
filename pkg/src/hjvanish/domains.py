"""Star-shaped domains, the scaling map Omega -> (1+r) Omega, and grids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import DomainError, ValidationError

__all__ = [
    "StarDomain",
    "ScaledDomain",
    "Grid",
    "interval",
    "disk",
    "radial",
    "check_a1",
    "scale",
    "build_grid",
    "default_r_samples",
]

MEMBERSHIP_TOL = 1e-12
_PROFILE_SAMPLES = 4096


def default_r_samples() -> np.ndarray:
    return 2.0 ** -np.arange(1, 11)


@dataclass(frozen=True)
class StarDomain:
    """Bounded domain star-shaped with respect to the origin.

    In 1D it is the interval (-a, b). In 2D it is described by a radial
    profile rho(theta) > 0: the closure is {t rho(theta) e_theta, 0 <= t <= 1}.
    """

    dim: int
    kind: str
    a: float = 1.0
    b: float = 1.0
    profile: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    params: tuple[tuple[str, float], ...] = ()
    kappa: float = float("nan")

    @cached_property
    def _rho_samples(self) -> np.ndarray:
        th = np.linspace(0.0, 2 * np.pi, _PROFILE_SAMPLES, endpoint=False)
        return np.asarray(self.profile(th), dtype=float)

    @property
    def min_rho(self) -> float:
        if self.dim == 1:
            return min(self.a, self.b)
        return float(np.min(self._rho_samples))

    @property
    def max_rho(self) -> float:
        if self.dim == 1:
            return max(self.a, self.b)
        return float(np.max(self._rho_samples))

    @property
    def ambient_radius(self) -> float:
        """R0 with 2 Omega inside B(0, R0)."""
        return 2.0 * self.max_rho

    def rho(self, theta) -> np.ndarray:
        return np.asarray(self.profile(np.asarray(theta, dtype=float)), dtype=float)

    def contains(self, x, s: float = 1.0, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            x = x[..., 0] if x.ndim and x.shape[-1] == 1 else x
            return (x >= -self.a * s - tol) & (x <= self.b * s + tol)
        r = np.hypot(x[..., 0], x[..., 1])
        th = np.arctan2(x[..., 1], x[..., 0])
        return r <= s * self.rho(th) + tol

    def project(self, x, s: float = 1.0) -> np.ndarray:
        """Radial projection of points onto the closure of s*Omega."""
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            return np.clip(x, -self.a * s, self.b * s)
        r = np.hypot(x[..., 0], x[..., 1])
        th = np.arctan2(x[..., 1], x[..., 0])
        lim = s * self.rho(th)
        fac = np.where(r > lim, lim / np.where(r > 0, r, 1.0), 1.0)
        return x * fac[..., None]

    def distance_outside(self, y: np.ndarray) -> np.ndarray:
        """Distance from points y (outside the closure) to the closure."""
        if self.dim == 1:
            y = np.asarray(y, dtype=float)
            return np.maximum(np.maximum(-self.a - y, y - self.b), 0.0)
        if self.kind == "disk":
            return np.maximum(np.hypot(y[..., 0], y[..., 1]) - self.max_rho, 0.0)
        return _polyline_distance(self, y)


def _boundary_point(dom: StarDomain, th: np.ndarray) -> np.ndarray:
    r = dom.rho(th)
    return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)


def _polyline_distance(dom: StarDomain, y: np.ndarray) -> np.ndarray:
    # dense sampling in theta, then golden-section refinement around the best sample
    th = np.linspace(0.0, 2 * np.pi, _PROFILE_SAMPLES, endpoint=False)
    bp = _boundary_point(dom, th)
    flat = y.reshape(-1, 2)
    out = np.empty(flat.shape[0])
    step = 2 * np.pi / _PROFILE_SAMPLES
    g = (math.sqrt(5.0) - 1.0) / 2.0
    for s in range(0, flat.shape[0], 256):
        yy = flat[s : s + 256]
        d2 = np.sum((yy[:, None, :] - bp[None, :, :]) ** 2, axis=-1)
        k = np.argmin(d2, axis=1)
        lo = th[k] - step
        hi = th[k] + step

        def dist(t):
            return np.hypot(*(yy - _boundary_point(dom, t)).T)

        for _ in range(60):
            c = hi - g * (hi - lo)
            d = lo + g * (hi - lo)
            left = dist(c) <= dist(d)
            hi = np.where(left, d, hi)
            lo = np.where(left, lo, c)
        out[s : s + 256] = np.minimum(dist(0.5 * (lo + hi)), np.sqrt(d2[np.arange(yy.shape[0]), k]))
    return out.reshape(y.shape[:-1])


def check_a1(dom: StarDomain, r_samples=None, boundary_samples: int = 512) -> float:
    """Estimate kappa = min dist(x, closure Omega) / r over x in (1+r) boundary.

    A value <= 0 means condition (A1) fails on the samples.

    Raises:
        DomainError: if the radial profile is not positive.
    """
    if dom.min_rho <= 0:
        raise DomainError("degenerate domain: radial profile must be positive")
    rs = default_r_samples() if r_samples is None else np.asarray(r_samples, dtype=float)
    if np.any(rs <= 0):
        raise ValidationError("r samples must be positive")
    best = math.inf
    for r in rs:
        if dom.dim == 1:
            pts = np.array([-(1 + r) * dom.a, (1 + r) * dom.b])
        else:
            th = np.linspace(0.0, 2 * np.pi, boundary_samples, endpoint=False)
            pts = (1 + r) * _boundary_point(dom, th)
        best = min(best, float(np.min(dom.distance_outside(pts))) / r)
    return best


def _finish(dom: StarDomain) -> StarDomain:
    if dom.min_rho <= 0:
        raise DomainError("degenerate domain: radial profile must be positive")
    kappa = check_a1(dom)
    return StarDomain(dom.dim, dom.kind, dom.a, dom.b, dom.profile, dom.params, kappa)


def interval(a: float = 1.0, b: float | None = None) -> StarDomain:
    """The interval (-a, b); ``interval(a)`` is symmetric."""
    b = a if b is None else b
    return _finish(StarDomain(1, "interval", float(a), float(b), params=(("a", float(a)), ("b", float(b)))))


def disk(radius: float = 1.0) -> StarDomain:
    R = float(radius)
    return _finish(
        StarDomain(2, "disk", profile=lambda th: np.full(np.shape(th), R), params=(("radius", R),))
    )


def radial(base: float = 1.0, amplitude: float = 0.3, frequency: int = 3) -> StarDomain:
    """rho(theta) = base + amplitude * cos(frequency * theta)."""
    b0, am, fr = float(base), float(amplitude), int(frequency)
    return _finish(
        StarDomain(
            2,
            "radial",
            profile=lambda th: b0 + am * np.cos(fr * th),
            params=(("base", b0), ("amplitude", am), ("frequency", float(fr))),
        )
    )


@dataclass(frozen=True)
class ScaledDomain:
    """The domain s * base with s = 1 + r."""

    base: StarDomain
    s: float

    @property
    def r(self) -> float:
        return self.s - 1.0

    @property
    def dim(self) -> int:
        return self.base.dim

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        return self.base.contains(np.asarray(x, dtype=float) / self.s, 1.0, tol / self.s)

    def project(self, x) -> np.ndarray:
        return self.base.project(x, self.s)

    @property
    def extent(self) -> tuple[float, float]:
        """1D endpoints (-a s, b s)."""
        return (-self.base.a * self.s, self.base.b * self.s)

    @property
    def diameter(self) -> float:
        if self.dim == 1:
            return (self.base.a + self.base.b) * self.s
        return 2.0 * self.base.max_rho * self.s


def scale(dom: StarDomain | ScaledDomain, r: float) -> ScaledDomain:
    """(1 + r) dom; scaling a scaled domain composes the factors.

    Raises:
        DomainError: when 1 + r <= 0.
    """
    if not 1.0 + r > 0.0:
        raise DomainError(f"scaling collapses the domain: 1 + r = {1.0 + r}")
    if isinstance(dom, ScaledDomain):
        return ScaledDomain(dom.base, dom.s * (1.0 + r))
    return ScaledDomain(dom, 1.0 + r)


@dataclass(frozen=True, eq=False)
class Grid:
    """Nodes covering the closure of a scaled domain.

    In 2D ``lattice`` holds the integer lattice coordinates of interior nodes
    and (-1, -1)-style sentinels are never used: projected boundary nodes get
    the coordinates of the lattice node they were projected from.
    """

    domain: ScaledDomain
    nodes: np.ndarray
    spacing: float
    boundary: np.ndarray
    lattice: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def x(self) -> np.ndarray:
        """1D abscissae."""
        return self.nodes[:, 0]

    @cached_property
    def triangulation(self):
        from scipy.spatial import Delaunay

        return Delaunay(self.nodes)

    def stencil(self, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Interpolation stencils (indices, weights, found) for points.

        Weights are nonnegative and sum to one. ``found`` is False for points
        outside the triangulated hull (2D) or the interval (1D).
        """
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        if self.dim == 1:
            xs = self.x
            t = pts[:, 0]
            found = (t >= xs[0] - 1e-12) & (t <= xs[-1] + 1e-12)
            k = np.clip(np.searchsorted(xs, t, side="right") - 1, 0, xs.size - 2)
            w1 = np.clip((t - xs[k]) / (xs[k + 1] - xs[k]), 0.0, 1.0)
            idx = np.stack([k, k + 1], axis=1)
            w = np.stack([1.0 - w1, w1], axis=1)
            return idx, w, found
        tri = self.triangulation
        simp = tri.find_simplex(pts, tol=1e-10)
        found = simp >= 0
        sf = np.where(found, simp, 0)
        T = tri.transform[sf]
        bary = np.einsum("nij,nj->ni", T[:, :2, :], pts - T[:, 2, :])
        w = np.concatenate([bary, 1.0 - bary.sum(axis=1, keepdims=True)], axis=1)
        w = np.clip(w, 0.0, None)
        w /= w.sum(axis=1, keepdims=True)
        idx = tri.simplices[sf]
        return idx, w, found

    def interpolate(self, values: np.ndarray, points, clamp: bool = True) -> np.ndarray:
        """Piecewise-linear interpolation; points outside are projected first."""
        pts = np.asarray(points, dtype=float)
        shape = pts.shape[:-1] if (self.dim == 2 or (pts.ndim >= 2 and pts.shape[-1] == 1)) else pts.shape
        pts = pts.reshape(-1, self.dim)
        if clamp:
            pts = self.domain.project(pts)
        idx, w, found = self.stencil(pts)
        if self.dim == 2 and not np.all(found):
            # projected points can sit a hair outside the hull: use the nearest node
            miss = ~found
            d = np.sum((pts[miss][:, None, :] - self.nodes[None, :, :]) ** 2, axis=-1)
            near = np.argmin(d, axis=1)
            idx[miss] = near[:, None]
            w[miss] = np.array([1.0, 0.0, 0.0])
        out = np.sum(np.asarray(values)[idx] * w, axis=1)
        return out.reshape(shape)


def build_grid(sdom: ScaledDomain, target_spacing: float | None = None, nodes: int | None = None) -> Grid:
    """Uniform grid on the closure of ``sdom``.

    1D grids have exact endpoints; ``nodes`` fixes the node count instead of
    the spacing. 2D grids are the lattice nodes inside plus radial projections
    of the adjacent outside lattice nodes.

    Raises:
        DomainError: fewer than 5 nodes would result.
    """
    if target_spacing is None and nodes is None:
        raise ValidationError("give target_spacing or nodes")
    if target_spacing is not None and not target_spacing > 0:
        raise ValidationError("target_spacing must be positive")
    if sdom.dim == 1:
        lo, hi = sdom.extent
        if nodes is None:
            nodes = int(math.ceil((hi - lo) / target_spacing - 1e-9)) + 1
        if nodes < 5:
            raise DomainError(f"grid too coarse: {nodes} nodes")
        xs = np.linspace(lo, hi, nodes)
        xs[0], xs[-1] = lo, hi
        bmask = np.zeros(nodes, dtype=bool)
        bmask[[0, -1]] = True
        return Grid(sdom, xs[:, None], float(xs[1] - xs[0]), bmask)
    return _build_grid_2d(sdom, target_spacing if target_spacing is not None else sdom.diameter / (nodes - 1))


def _build_grid_2d(sdom: ScaledDomain, h: float) -> Grid:
    R = sdom.base.max_rho * sdom.s
    m = int(math.ceil(R / h)) + 1
    k = np.arange(-m, m + 1)
    I, J = np.meshgrid(k, k, indexing="ij")
    lat = np.stack([I.ravel(), J.ravel()], axis=-1)
    pts = lat * h
    inside = sdom.contains(pts)
    inside_grid = inside.reshape(I.shape)
    # outside nodes with an inside 8-neighbour get projected onto the boundary
    pad = np.pad(inside_grid, 1)
    near = np.zeros_like(inside_grid)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                near |= pad[1 + di : 1 + di + I.shape[0], 1 + dj : 1 + dj + I.shape[1]]
    ring = (~inside_grid) & near
    in_pts = pts[inside]
    in_lat = lat[inside]
    ring_pts = sdom.project(pts[ring.ravel()])
    ring_lat = lat[ring.ravel()]
    keep_pts, keep_lat = [], []
    from scipy.spatial import cKDTree

    tree = cKDTree(in_pts)
    for p, l in zip(ring_pts, ring_lat):
        if tree.query(p)[0] < 0.3 * h:
            continue
        if keep_pts and np.min(np.hypot(*(np.asarray(keep_pts) - p).T)) < 0.3 * h:
            continue
        keep_pts.append(p)
        keep_lat.append(l)
    nodes = np.concatenate([in_pts, np.asarray(keep_pts).reshape(-1, 2)])
    latt = np.concatenate([in_lat, np.asarray(keep_lat, dtype=int).reshape(-1, 2)])
    bmask = np.zeros(nodes.shape[0], dtype=bool)
    bmask[in_pts.shape[0] :] = True
    # lattice nodes that sit on the boundary already
    r_in = np.hypot(in_pts[:, 0], in_pts[:, 1])
    th = np.arctan2(in_pts[:, 1], in_pts[:, 0])
    bmask[: in_pts.shape[0]] |= np.abs(r_in - sdom.s * sdom.base.rho(th)) <= 1e-12
    if nodes.shape[0] < 5:
        raise DomainError(f"grid too coarse: {nodes.shape[0]} nodes")
    return Grid(sdom, nodes, float(h), bmask, latt)
