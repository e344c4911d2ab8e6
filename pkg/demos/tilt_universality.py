"""Rate dependence for the tilted Hamiltonian H = |p| + x.

With phi = lambda and r = lambda^m the ratio r / phi tends to +inf, 1 or 0
for m = 0.5, 1, 2. The first normalized family diverges only in the first
case.
"""

from hjvanish.asymptotics import Rate, classify_rates, first_family_limit
from hjvanish.domains import interval
from hjvanish.hamiltonians import tilted
from hjvanish.hj_solver import SolveConfig

H = tilted(1.0)
lams = [0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125]
cfg = SolveConfig(nodes=801)

for m in (0.5, 1.0, 2.0):
    rates = (Rate("power", 1.0, 1.0), Rate("power", 1.0, m))
    gamma = classify_rates(*rates, lams).gamma
    res = first_family_limit(H, interval(), rates, lams, cfg)
    norms = ", ".join(f"{s:.3g}" for s in res.sup_norms)
    print(f"m = {m}: gamma = {gamma:g}, verdict = {res.verdict}, sup norms = [{norms}]")
