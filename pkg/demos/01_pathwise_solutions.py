"""Pathwise solutions of a boundary problem driven by a Poisson path.

Each sample path of the Poisson process is a finite set of jump times in
(0, 1]. Given the path, X0 = psi(X1) is a scalar fixed-point problem.
"""
from poisson_bvp import JumpPath, NoFixedPoint, preset, solve_linear_bvp
from poisson_bvp.montecarlo import sample_paths

# %% A nonlinear problem on one path
p = preset("nonlinear")
path = JumpPath((0.25, 0.6, 0.9))
traj = p.solve(path)
print("x0 =", traj.x0, " x1 =", traj.x1, " psi(x1) =", float(p.psi.eval(traj.x1)))
for t in (0.0, 0.25, 0.5, 0.75, 1.0):
    print(f"  X({t:.2f}) = {traj(t):+.6f}")

# %% Linear coefficients have a closed form; the generic solver agrees
q = preset("law")
for w in sample_paths(1, 5):
    exact = solve_linear_bvp(q.linear, q.psi, w)
    print(len(w), "jumps, |generic - closed form| at t=1:", abs(q.solve(w).x1 - exact.x1))

# %% Without the hypotheses existence can fail, depending on the parity of N1
c = preset("counterexample")
for n in range(5):
    w = JumpPath(tuple((k + 1) / (n + 1) for k in range(n)))
    try:
        print(n, "jumps -> x0 =", c.solve(w).x0)
    except NoFixedPoint:  # odd N1
        print(n, "jumps -> no solution")
