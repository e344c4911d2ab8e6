"""Vanishing-discount limits for H = |p| - e^{-|x|} on shrinking intervals.

Solves the discounted problem on (-(1 + r), 1 + r) with r = -lambda and
compares the normalized profiles against the closed-form limit
u0(x) = e^{-|x|} + e^{-1}|x| - 2e^{-1}, shifted by the rate constant.
"""

import numpy as np

from hjvanish.asymptotics import Rate, first_family_limit
from hjvanish.domains import interval
from hjvanish.ergodic import eigenvalue
from hjvanish.hamiltonians import eikonal
from hjvanish.hj_solver import SolveConfig

H = eikonal("exp_abs")
dom = interval()
cfg = SolveConfig(nodes=1001)

erg = eigenvalue(H, dom, cfg=cfg)
print(f"c(0) = {erg.c:.7f}   (exact -e^-1 = {-np.exp(-1):.7f})")

lams = [0.1, 0.05, 0.025, 0.0125, 0.00625]
res = first_family_limit(H, dom, (Rate("power", 1.0, 1.0), Rate("power", -1.0, 1.0)), lams, cfg)
x = res.base_grid.x
u0 = np.exp(-np.abs(x)) + np.exp(-1) * np.abs(x) - 2 * np.exp(-1)

# r / phi = -1, so the limit is u0 shifted by +e^{-1}
target = u0 + np.exp(-1)
print(f"verdict: {res.verdict}")
for lam, prof in zip(res.lambdas, res.profiles):
    print(f"  lambda = {lam:<8g} sup|profile - target| = {np.max(np.abs(prof - target)):.2e}")
print(f"extrapolated limit error: {np.max(np.abs(res.limit - target)):.2e}")
