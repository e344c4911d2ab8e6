import math

import numpy as np
import pytest

from hjvanish.domains import interval
from hjvanish.hamiltonians import eikonal, quadratic, tilted
from hjvanish.hj_solver import SolveConfig

E1 = math.exp(-1.0)


@pytest.fixture(scope="session")
def unit():
    return interval(1.0)


@pytest.fixture(scope="session")
def h_exp():
    # |p| - exp(-|x|)
    return eikonal("exp_abs")


@pytest.fixture(scope="session")
def h_tilt():
    # |p| + x
    return tilted(1.0)


@pytest.fixture(scope="session")
def h_square():
    return eikonal("square")


@pytest.fixture(scope="session")
def h_quad():
    return quadratic("square", jointly_convex=True)


@pytest.fixture(scope="session")
def cfg():
    return SolveConfig()


def u_exp_closed(x, lam):
    """Exact discounted solution for |p| - exp(-|x|) on (-1, 1), discount lam."""
    x = np.abs(np.asarray(x, dtype=float))
    return np.exp(-x) / (1 + lam) + np.exp(-1 - lam + lam * x) / (lam * (1 + lam))


ACCEPTANCE_LINES = []


def report_criterion(number, passed, detail):
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
