"""Occupation-measure LP for H = |p| - e^{-|x|} on (-1, 1).

The minimizing measure should sit at the minimum of the potential (x = +-1)
with zero velocity, and the LP value should equal -c(0) = e^{-1}.
"""

import numpy as np

from hjvanish.domains import interval
from hjvanish.hamiltonians import eikonal
from hjvanish.mather_lp import build_lp, expansion_bounds, solve_mather

H = eikonal("exp_abs")
lp = build_lp(H, interval(), nodes=101, velocities=21, K=12)
value, mu = solve_mather(lp)
print(f"LP value {value:.7f}   expected e^-1 = {np.exp(-1):.7f}")
print(f"max holonomy residual {np.max(np.abs(mu.holonomy_residual)):.1e}")

for x, v, w in mu.support(1e-9):
    print(f"  mass {w:.4f} at x = {x[0]:+.3f}, v = {v[0]:+.3f}")

b = expansion_bounds(lp)
print(f"optimal-face bounds for the expansion slope: [{b.c1_minus:.6f}, {b.c1_plus:.6f}]")
