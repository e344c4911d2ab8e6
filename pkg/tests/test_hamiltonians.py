import math

import numpy as np
import pytest

from hjvanish.errors import AmbientOverflowError, InfiniteLagrangianError, KindMismatchError, ValidationError
from hjvanish.hamiltonians import (
    dx_lagrangian,
    eikonal,
    kind_check,
    legendre_transform,
    potential_from_id,
    potential_from_table,
    power_hamiltonian,
    quadratic,
    scaled_lagrangian_difference,
    scaled_weight,
    tilted,
)


def brute_legendre(hfunc, x, v, pmax=50.0, n=200001):
    p = np.linspace(-pmax, pmax, n)
    return float(np.max(p * v - hfunc(x, p)))


def test_eikonal_lagrangian_is_potential(h_exp):
    assert legendre_transform(h_exp, 0.5, 0.3) == pytest.approx(math.exp(-0.5), abs=1e-12)


def test_eikonal_lagrangian_infinite_outside_unit_speed(h_exp):
    assert math.isinf(h_exp.lagrangian([0.5], [1.5])[()])


def test_quadratic_lagrangian_at_rest():
    H = quadratic("zero")
    for x in (-0.7, 0.0, 0.4):
        assert legendre_transform(H, x, 0.0) == pytest.approx(0.0, abs=1e-14)


def test_tilted_lagrangian_matches_brute_force(h_tilt):
    ref = brute_legendre(lambda x, p: np.abs(p) + x, 0.2, 0.9)
    assert legendre_transform(h_tilt, 0.2, 0.9) == pytest.approx(ref, abs=1e-9)
    assert ref == pytest.approx(-0.2, abs=1e-9)


def test_power_lagrangian_matches_brute_force():
    H = power_hamiltonian(3.0, "square")
    ref = brute_legendre(lambda x, p: np.abs(p) ** 3 / 3 + x * x, 0.3, 0.8, pmax=5.0)
    assert legendre_transform(H, 0.3, 0.8) == pytest.approx(ref, abs=1e-6)


def test_dx_lagrangian_eikonal(h_exp):
    assert dx_lagrangian(h_exp, 0.5, 0.0)[0] == pytest.approx(-math.exp(-0.5), abs=1e-12)


def test_dx_lagrangian_quadratic(h_quad):
    assert dx_lagrangian(h_quad, 0.3, 0.0)[0] == pytest.approx(-0.6, abs=1e-12)


def test_dx_lagrangian_rejects_infinite_cost(h_exp):
    with pytest.raises(InfiniteLagrangianError):
        dx_lagrangian(h_exp, 0.2, 2.0)


@pytest.mark.parametrize("name", ["exp_abs", "square", "sqrt_edge", "zero"])
def test_scaled_weight_vanishes_at_origin(name):
    H = eikonal(name)
    for v in (-1.0, 0.0, 0.7):
        assert scaled_weight(H, 0.0, v) == 0.0


def test_scaled_difference_tends_to_weight(h_exp):
    g = scaled_weight(h_exp, 0.5, 0.0)
    assert g == pytest.approx(0.5 * math.exp(-0.5))
    d = scaled_lagrangian_difference(h_exp, 0.5, 0.0, 1e-3, 1)
    assert d == pytest.approx(g, abs=1e-3)
    d = scaled_lagrangian_difference(h_exp, 0.5, 0.0, 1e-3, -1)
    assert d == pytest.approx(-g, abs=1e-3)


def test_scaled_difference_zero_for_constant_potential():
    H = eikonal("zero")
    assert scaled_lagrangian_difference(H, 0.8, 0.5, 0.01, 1) == 0.0
    assert scaled_lagrangian_difference(H, 0.0, 0.5, 0.01, -1) == 0.0


def test_velocity_bound_is_enforced(h_exp):
    with pytest.raises(ValidationError):
        legendre_transform(h_exp, 0.0, 1.5)


def test_ambient_ball_is_enforced(h_exp):
    with pytest.raises(AmbientOverflowError):
        legendre_transform(h_exp, 3.0, 0.0)


def test_scaled_difference_validates_arguments(h_exp):
    with pytest.raises(ValidationError):
        scaled_lagrangian_difference(h_exp, 0.5, 0.0, 0.7, 1)
    with pytest.raises(ValidationError):
        scaled_lagrangian_difference(h_exp, 0.5, 0.0, 0.1, 0)


def test_unknown_potential():
    with pytest.raises(ValidationError):
        potential_from_id("nope")


def test_tabulated_potential_interpolates():
    V = potential_from_table([-1.0, 0.0, 1.0], [1.0, 0.0, 1.0])
    x = np.array([[-0.5], [0.25]])
    np.testing.assert_allclose(V(x), [0.5, 0.25])


def test_kind_check(h_exp):
    kind_check(h_exp, "eikonal")
    with pytest.raises(KindMismatchError):
        kind_check(h_exp, "quadratic")


def test_tilted_hamiltonian_value(h_tilt):
    assert h_tilt.H([0.3], [-2.0])[()] == pytest.approx(2.3)
