import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from hjvanish.errors import LPInfeasibleError, LPUnboundedError
from hjvanish.simplex import simplex


def vertex_enumeration(c, A, b):
    """Best basic feasible solution by trying every column subset."""
    m, n = A.shape
    rank = np.linalg.matrix_rank(A)
    best, arg = np.inf, None
    for cols in itertools.combinations(range(n), rank):
        B = A[:, cols]
        if np.linalg.matrix_rank(B) < rank:
            continue
        xb, *_ = np.linalg.lstsq(B, b, rcond=None)
        if np.linalg.norm(B @ xb - b) > 1e-9 or np.any(xb < -1e-12):
            continue
        x = np.zeros(n)
        x[list(cols)] = xb
        if c @ x < best - 1e-13:
            best, arg = float(c @ x), x
    return best, arg


def test_textbook_instance():
    # min -x1 - 2x2 s.t. x1 + x2 + s1 = 4, x1 + 3x2 + s2 = 6
    c = np.array([-1.0, -2.0, 0.0, 0.0])
    A = np.array([[1.0, 1.0, 1.0, 0.0], [1.0, 3.0, 0.0, 1.0]])
    b = np.array([4.0, 6.0])
    res = simplex(c, A, b)
    assert res.value == pytest.approx(-5.0)
    np.testing.assert_allclose(res.x[:2], [3.0, 1.0])


def test_duals_certify_optimality():
    c = np.array([2.0, 3.0, 1.0, 0.0])
    A = np.array([[1.0, 1.0, 1.0, 0.0], [1.0, -1.0, 0.0, 1.0]])
    b = np.array([3.0, 1.0])
    res = simplex(c, A, b)
    assert res.duals @ b == pytest.approx(res.value)
    assert np.all(res.reduced_costs >= -1e-10)


def test_infeasible():
    A = np.array([[1.0, 1.0]])
    with pytest.raises(LPInfeasibleError):
        simplex(np.ones(2), A, np.array([-1.0]))


def test_unbounded():
    A = np.array([[1.0, -1.0]])
    with pytest.raises(LPUnboundedError):
        simplex(np.array([0.0, -1.0]), A, np.array([1.0]))


def test_redundant_rows_are_dropped():
    A = np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0], [1.0, 0.0, -1.0]])
    b = np.array([1.0, 2.0, 0.0])
    res = simplex(np.array([1.0, 2.0, 3.0]), A, b)
    assert res.value == pytest.approx(2.0)
    assert len(res.rows_kept) == 2


def test_degenerate_cycling_instance():
    # Beale's classic cycling example in equality form; Bland's rule terminates
    c = np.array([-0.75, 150.0, -0.02, 6.0, 0, 0, 0])
    A = np.array(
        [
            [0.25, -60.0, -0.04, 9.0, 1, 0, 0],
            [0.5, -90.0, -0.02, 3.0, 0, 1, 0],
            [0.0, 0.0, 1.0, 0.0, 0, 0, 1],
        ]
    )
    b = np.array([0.0, 0.0, 1.0])
    res = simplex(c, A, b)
    assert res.value == pytest.approx(-0.05)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(4, 9))
def test_matches_vertex_enumeration(seed, m, n):
    rng = np.random.default_rng(seed)
    A = rng.integers(-3, 4, size=(m, n)).astype(float)
    A = np.vstack([np.ones(n), A[: m - 1]]) if m > 1 else np.ones((1, n))
    x0 = rng.random(n)
    x0 /= x0.sum()
    b = A @ x0  # feasible by construction, bounded through the mass row
    c = rng.integers(-5, 6, size=n).astype(float)
    best, _ = vertex_enumeration(c, A, b)
    res = simplex(c, A, b)
    assert res.value == pytest.approx(best, abs=1e-9)
    np.testing.assert_allclose(A @ res.x, b, atol=1e-9)
    assert np.all(res.x >= -1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_agrees_with_highs(seed):
    rng = np.random.default_rng(seed)
    m, n = 6, 30
    A = rng.normal(size=(m, n))
    b = A @ rng.random(n)
    c = rng.normal(size=n)
    ref = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    if ref.status == 3:
        with pytest.raises(LPUnboundedError):
            simplex(c, A, b)
        return
    assert ref.status == 0
    assert simplex(c, A, b).value == pytest.approx(ref.fun, abs=1e-7)
