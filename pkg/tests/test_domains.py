import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hjvanish.domains import build_grid, check_a1, disk, interval, radial, scale
from hjvanish.errors import DomainError, ValidationError


@pytest.mark.parametrize("r", [0.01, 0.1, 0.5])
def test_interval_kappa_is_one(r):
    assert check_a1(interval(1.0), [r]) == pytest.approx(1.0, abs=1e-12)


def test_disk_kappa_is_one():
    assert check_a1(disk(1.0)) == pytest.approx(1.0, abs=1e-9)


def test_star_profile_kappa_matches_dense_sampling():
    dom = radial(1.0, 0.3, 3)
    kappa = check_a1(dom, [0.05])
    # independent oracle: brute-force distance from scaled boundary to a dense boundary polyline
    th = np.linspace(0, 2 * np.pi, 20000, endpoint=False)
    rho = 1 + 0.3 * np.cos(3 * th)
    bnd = np.stack([rho * np.cos(th), rho * np.sin(th)], axis=1)
    ts = np.linspace(0, 2 * np.pi, 512, endpoint=False)
    rs = 1 + 0.3 * np.cos(3 * ts)
    pts = 1.05 * np.stack([rs * np.cos(ts), rs * np.sin(ts)], axis=1)
    d = np.min(np.linalg.norm(pts[:, None, :] - bnd[None, :, :], axis=-1), axis=1)
    assert 0 < kappa < 1
    assert kappa == pytest.approx(d.min() / 0.05, rel=2e-2)


def test_scaled_extent():
    assert scale(interval(1.0), -0.25).extent == pytest.approx((-0.75, 0.75))
    assert scale(interval(1.0), 0.1).extent == pytest.approx((-1.1, 1.1))


def test_scale_rejects_collapse():
    with pytest.raises(ValidationError):
        scale(interval(1.0), -1.0)


def test_degenerate_profile():
    with pytest.raises((DomainError, ValidationError)):
        radial(1.0, 1.2, 3)


def test_uniform_interval_grid():
    g = build_grid(scale(interval(1.0), 0.0), target_spacing=0.5)
    np.testing.assert_allclose(g.x, [-1, -0.5, 0, 0.5, 1])
    assert g.boundary.tolist() == [True, False, False, False, True]


def test_interval_grid_keeps_endpoints():
    g = build_grid(scale(interval(0.9), 0.0), target_spacing=0.5)
    assert g.x[0] == pytest.approx(-0.9)
    assert g.x[-1] == pytest.approx(0.9)
    assert np.ptp(np.diff(g.x)) < 1e-12


def test_disk_grid_nodes_inside():
    g = build_grid(scale(disk(1.0), 0.0), target_spacing=0.25)
    assert np.all(np.hypot(g.nodes[:, 0], g.nodes[:, 1]) <= 1 + 1e-12)
    assert g.boundary.any()


def test_interpolation_is_exact_for_linear_functions():
    g = build_grid(scale(interval(1.0), 0.0), nodes=11)
    pts = np.linspace(-1, 1, 37)
    np.testing.assert_allclose(g.interpolate(2 * g.x - 1, pts), 2 * pts - 1, atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.9, 2.0), st.floats(0.2, 3.0), st.floats(0.2, 3.0))
def test_scaled_membership(r, a, b):
    dom = interval(a, b)
    sd = scale(dom, r)
    lo, hi = sd.extent
    assert lo == pytest.approx(-(1 + r) * a)
    assert hi == pytest.approx((1 + r) * b)
    assert sd.contains(np.array([[lo], [hi]])).all()
    assert not sd.contains(np.array([[hi + 1e-6]])).any()
