import numpy as np
import pytest

from conftest import E1
from hjvanish.asymptotics import Rate, first_family_limit
from hjvanish.domains import interval, scale
from hjvanish.ergodic import eigenvalue
from hjvanish.hamiltonians import eikonal
from hjvanish.hj_solver import SolveConfig, solve_discounted

pytestmark = pytest.mark.slow


def u0_exp(x):
    x = np.abs(x)
    return np.exp(-x) + E1 * x - 2 * E1


def test_grid_refinement_reduces_error():
    H = eikonal("exp_abs")
    errs = []
    for n in (1001, 2001, 4001):
        u = solve_discounted(H, scale(interval(), 0.0), 0.1, SolveConfig(nodes=n))
        x = u.grid.x
        exact = np.exp(-np.abs(x)) / 1.1 + np.exp(-1.1 + 0.1 * np.abs(x)) / 0.11
        errs.append(float(np.max(np.abs(u.values - exact))))
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 5e-4


def test_eigenvalue_on_fine_grid():
    res = eigenvalue(eikonal("exp_abs"), interval(), cfg=SolveConfig(nodes=4001))
    assert res.c == pytest.approx(-E1, abs=1e-4)


def test_oscillating_rate_profiles_converge():
    # phi = lam^(1/2), r = lam sin(1/lam): r / phi -> 0 although r changes sign.
    # The pulled-back profile moves by O(|r| / phi + phi), so each raw profile
    # is checked against that envelope instead of trusting the t-extrapolation.
    lams = np.array([0.1 * 2.0**-k for k in range(10)])
    res = first_family_limit(
        eikonal("exp_abs"), interval(), (Rate("power", 1.0, 0.5), Rate("lambda_sin", 1.0, 1.0)), lams, SolveConfig(nodes=2001)
    )
    assert res.verdict == "converges"
    exact = u0_exp(res.base_grid.x)
    errs = np.max(np.abs(res.profiles - exact), axis=1)
    phi = np.sqrt(lams)
    envelope = np.abs(lams * np.sin(1.0 / lams)) / phi + phi
    assert np.all(errs <= envelope)
    assert errs[-1] < 1e-2
    assert errs[-1] < 0.5 * errs[0]
