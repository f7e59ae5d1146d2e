"""Chaos expansion of a solution and a reciprocal-property check."""
from poisson_bvp import build_case5_chaos, preset, solve_linear_bvp
from poisson_bvp.montecarlo import sample_paths
from poisson_bvp.reciprocal import reciprocal_case

p = preset("chaos_case5")
ser = build_case5_chaos(p.linear.f2, float(p.psi.eval(0.0)), p.xstar(), 0.5)
worst = max(abs(ser(w) - solve_linear_bvp(p.linear, p.psi, w)(0.5)) for w in sample_paths(9, 500))
print("order", ser.truncation_order, "series vs pathwise, max diff:", worst)

# low orders show up through the tail bound
short = build_case5_chaos(p.linear.f2, float(p.psi.eval(0.0)), p.xstar(), 0.5, order=3)
print("order 3 worst tail bound:", max(short.tail_bound(w) for w in sample_paths(9, 500)))

# X_u and X_v independent given X_a and X_b
rep = reciprocal_case(preset("case4"), 10_000, seed=1)
print("case 4:", rep.to_dict()["verdict"], "smallest cell p-value", min(rep.p_values))
