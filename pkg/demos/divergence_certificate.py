"""Divergence of the normalized family for a sawtooth potential.

Odd and even subsequences of shrinking intervals select minimizers on
opposite sides, so their limits differ by roughly the L1 norm of V. The
V = x^2 control has a single minimizer and no gap.
"""

from hjvanish.counterexample import divergence_experiment
from hjvanish.hamiltonians import potential_from_id

cert = divergence_experiment(K=4)
print(f"sawtooth: gap {cert.gap:.5f}, threshold {cert.threshold:.5f}, diverges = {cert.diverges}")
for row in cert.table:
    k, r_k, z_k, c_k, tau_k, phi_k = row[:6]
    print(f"  k = {k}: r = {r_k:.3e}, z = {z_k:+.4f}, c = {c_k:.4f}, phi = {phi_k:.3e}")

ctl = divergence_experiment(K=4, potential=potential_from_id("square"))
print(f"x^2 control: gap {ctl.gap:.2e}, diverges = {ctl.diverges}")
