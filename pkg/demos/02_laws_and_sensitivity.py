"""Law of X_t: an atom on the jump-free path plus a continuous part.

The atom sits at the deterministic solution and carries mass P(N1 = 0) = e^-1.
"""
import math

import numpy as np

from poisson_bvp import JumpPath, estimate_flow_law, estimate_law, preset
from poisson_bvp.sensitivity import dX0_dsj, fd_oracle

p = preset("law")
est = estimate_law(p, 0.5, 20_000, seed=3)
print("atom at", est.atom_location, "mass", est.atom_mass_hat, "vs", math.exp(-1))
print("quantiles of the continuous part:",
      np.quantile(est.values[~est.is_atom], [0.1, 0.5, 0.9]).round(4))

# the initial-value flow has its atom mass at e^-t instead
f = preset("flow_law")
fl = estimate_flow_law(f.f, f.F, f.x, 0.5, 20_000, seed=3)
print("flow atom mass", fl.atom_mass_hat, "vs", math.exp(-0.5))

# %% Moving a jump time moves the whole solution
q = preset("nonlinear")
path = JumpPath((0.3, 0.7))
traj = q.solve(path, tol=1e-13)
for j in (1, 2):
    print(f"dX0/ds{j}: analytic {dX0_dsj(traj, j, q.f, q.F, q.psi):+.8f}"
          f"  finite difference {fd_oracle(q, path, j, 0.0):+.8f}")
