"""Branching mechanisms: evaluating psi, inverting it, and the tail equation for v.

Run with ``python3 demos/01_branching_mechanisms.py``.
"""
# %%
import numpy as np

from levytree.mechanism import (
    BranchingMechanism,
    MechanismAnalytics,
    StableLevy,
    bismut_laplace,
    psi_inverse,
    rayleigh_moment,
    solve_v,
    z_moment,
)

brownian = BranchingMechanism(0.0, 0.5)
stable = BranchingMechanism(0.0, 0.0, StableLevy(1.0, 1.5))

# %% psi on a grid; the quadratic one is exactly lam^2 / 2
lams = np.array([0.25, 1.0, 4.0])
for name, mech in (("brownian", brownian), ("stable 1.5", stable)):
    print(f"{name:>10}: psi =", [round(mech.psi(x), 6) for x in lams])

# %% v(a) solves int_v^inf dlam / psi(lam) = a
for name, mech in (("brownian", brownian), ("stable 1.5", stable)):
    a = MechanismAnalytics(mech)
    print(f"{name:>10}: v(1) = {solve_v(a, 1.0):.10f}, psi^-1(1) = {psi_inverse(a, 1.0):.10f}")

# %% the Laplace transform of the spine height at rho = 0 undoes psi'
a = MechanismAnalytics(stable)
for q in (0.5, 1.0, 2.0):
    print(f"q={q}: laplace * psi'(q) = {bismut_laplace(a, stable.psi(q), 0.0) * stable.dpsi(q):.15f}")

# %% moments of the limiting height; gamma = 2 recovers the Rayleigh law
for n in range(1, 5):
    print(f"E[Z^{n}] = {z_moment(2.0, 0.5, n):.12f}   Rayleigh: {rayleigh_moment(n):.12f}")
print("stable 1.5 moments:", [round(z_moment(1.5, 1.0, n), 6) for n in range(1, 5)])
