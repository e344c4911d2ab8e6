import numpy as np
import pytest

from hjvanish.counterexample import build_potential, divergence_experiment, l1_norm, minimizer_scan
from hjvanish.errors import ValidationError
from hjvanish.hamiltonians import potential_from_id


def trapezoid_l1(xs, vals):
    # nonnegative piecewise-linear function: the trapezoid rule is exact
    return float(np.sum(np.diff(xs) * (vals[1:] + vals[:-1]) / 2))


@pytest.fixture(scope="module")
def cert4():
    return divergence_experiment(4)


@pytest.fixture(scope="module")
def control4():
    return divergence_experiment(4, potential=potential_from_id("square"))


def test_vertices_k3():
    V = build_potential(3)
    z = [-0.75, 0.9375, -0.984375]
    np.testing.assert_allclose(V(np.array(z)), [0.5, 0.25, 0.125])


def test_minimizer_on_shrunken_domain():
    V = build_potential(3)
    r2 = 1 / 16
    xs = np.linspace(-1 + r2, 1 - r2, 200001)
    scan = xs[np.argmin(V(xs))]
    (row,) = minimizer_scan(V, [r2])
    assert row["argmin"] == pytest.approx((0.9375,))
    assert scan == pytest.approx(0.9375, abs=1e-4)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_alternating_sides(k):
    V = build_potential(4)
    (row,) = minimizer_scan(V, [4.0**-k])
    s = (-1) ** k
    assert row["side"] == s
    assert row["argmin"] == pytest.approx((s * (1 - 4.0**-k),))
    assert row["unique"]


def test_large_shrink_lands_on_first_vertex_side():
    (row,) = minimizer_scan(build_potential(4), [0.3])
    assert row["side"] == -1
    assert row["argmin"] == pytest.approx((-0.7,))


def test_control_minimizer_stays_at_origin():
    rows = minimizer_scan(potential_from_id("square"), [0.25, 1 / 16, 1 / 64])
    assert all(r["argmin"] == pytest.approx((0.0,), abs=1e-9) for r in rows)


def test_l1_norm_exact():
    V = build_potential(4)
    assert V.l1 == pytest.approx(trapezoid_l1(V.xs, V.values), rel=1e-15)
    assert V.l1 > 0
    assert l1_norm(potential_from_id("square")) == pytest.approx(2 / 3)


@pytest.mark.parametrize("K", [1, 21])
def test_depth_validation(K):
    with pytest.raises(ValidationError):
        build_potential(K)


def test_experiment_needs_depth_three():
    with pytest.raises(ValidationError):
        divergence_experiment(2)


def test_divergence_gap(cert4):
    V = build_potential(4)
    assert cert4.diverges
    assert cert4.gap >= trapezoid_l1(V.xs, V.values) - 2e-2


def test_limits_match_reference_distances(cert4):
    assert np.max(np.abs(cert4.limit_odd - cert4.reference_odd)) < 5e-2
    assert np.max(np.abs(cert4.limit_even - cert4.reference_even)) < 5e-2


def test_schedule_ratio(cert4):
    for k, r, z, c, tau, phi, ratio, err in cert4.table:
        assert ratio == pytest.approx(r / phi)
        assert ratio >= 10 * 4.0 ** (k - 1)
        assert tau <= 1e-1
        assert err <= r


def test_control_limits_coincide(control4):
    assert not control4.diverges
    assert control4.gap <= 2e-2
