"""Dense revised simplex method with Bland's anti-cycling rule.

Solves min c.x subject to A x = b, x >= 0. The basis inverse is kept
explicitly and refactorized every ``refactor`` pivots. Ties are broken by the
lowest index everywhere, so the pivot sequence is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LPInfeasibleError, LPUnboundedError, NonConvergenceError, ValidationError

__all__ = ["SimplexResult", "simplex"]


@dataclass(frozen=True, eq=False)
class SimplexResult:
    x: np.ndarray
    value: float
    basis: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    iterations: int
    rows_kept: np.ndarray


def _iterate(A, b, c, basis, Binv, allowed, tol, max_iter, refactor, it0):
    m = A.shape[0]
    xB = Binv @ b
    it = it0
    since = 0
    while True:
        y = c[basis] @ Binv
        d = c - y @ A
        d[basis] = 0.0
        cand = np.flatnonzero((d < -tol) & allowed)
        if cand.size == 0:
            return basis, Binv, xB, it
        j = int(cand[0])
        u = Binv @ A[:, j]
        pos = u > tol
        if not np.any(pos):
            raise LPUnboundedError(f"objective unbounded along column {j}")
        ratios = np.full(m, np.inf)
        ratios[pos] = np.maximum(xB[pos], 0.0) / u[pos]
        rmin = ratios.min()
        ties = np.flatnonzero(ratios <= rmin + tol * max(1.0, abs(rmin)))
        r = int(ties[np.argmin(basis[ties])])
        theta = max(xB[r], 0.0) / u[r]
        xB = xB - theta * u
        xB[r] = theta
        piv = Binv[r] / u[r]
        Binv = Binv - np.outer(u, piv)
        Binv[r] = piv
        basis[r] = j
        it += 1
        since += 1
        if since >= refactor:
            Binv = np.linalg.inv(A[:, basis])
            xB = Binv @ b
            since = 0
        if it >= max_iter:
            raise NonConvergenceError(f"simplex exceeded {max_iter} pivots")


def simplex(c, A_eq, b_eq, tol: float = 1e-10, max_iter: int = 200000, refactor: int = 64) -> SimplexResult:
    """Two-phase revised simplex.

    Raises:
        LPInfeasibleError: the equality system has no nonnegative solution.
        LPUnboundedError: the objective is unbounded below.
    """
    c = np.asarray(c, dtype=float)
    A = np.array(A_eq, dtype=float, ndmin=2)
    b = np.array(b_eq, dtype=float, ndmin=1)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise ValidationError("inconsistent LP dimensions")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise ValidationError("LP data must be finite")
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    # phase I on [A | I]
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    basis = np.arange(n, n + m)
    allowed = np.ones(n + m, dtype=bool)
    basis, Binv, xB, it = _iterate(A1, b, c1, basis, np.eye(m), allowed, tol, max_iter, refactor, 0)
    infeas = float(np.sum(xB[basis >= n]))
    if infeas > 1e-9 * (1.0 + np.max(np.abs(b), initial=0.0)):
        raise LPInfeasibleError(f"phase I residual {infeas:.3e}")
    # pivot remaining zero-level artificials out; drop redundant rows
    rows = np.arange(m)
    r = 0
    while r < basis.size:
        if basis[r] < n:
            r += 1
            continue
        row = Binv[r] @ A1[rows, :n]
        row[basis[basis < n]] = 0.0
        cand = np.flatnonzero(np.abs(row) > 1e-9)
        if cand.size:
            j = int(cand[0])
            u = Binv @ A1[rows, j]
            piv = Binv[r] / u[r]
            Binv = Binv - np.outer(u, piv)
            Binv[r] = piv
            basis[r] = j
            r += 1
        else:
            keep = np.ones(basis.size, dtype=bool)
            keep[r] = False
            rows = rows[keep]
            basis = basis[keep]
            Binv = np.linalg.inv(A1[rows][:, basis])
    A2 = A[rows]
    b2 = b[rows]
    Binv = np.linalg.inv(A2[:, basis])
    basis, Binv, xB, it = _iterate(A2, b2, c, basis, Binv, np.ones(n, dtype=bool), tol, max_iter, refactor, it)
    x = np.zeros(n)
    x[basis] = np.maximum(xB, 0.0)
    y = c[basis] @ Binv
    d = c - y @ A2
    d[basis] = 0.0
    # duals are reported for the original row signs; dropped rows get 0
    duals = np.zeros(m)
    duals[rows] = y
    duals[neg] *= -1.0
    return SimplexResult(x, float(c @ x), basis.copy(), duals, d, it, rows)
