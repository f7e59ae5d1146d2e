import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from poisson_bvp import (EMPTY, BoundaryMap, CanonicalFunctional, CoefficientField, JumpPath,
                         LinearCoefficients, LinearSkorohod, PreconditionError, SkorohodSolver, SpecError,
                         deterministic_fixed_point, parse_spec, phi_operator, preset, psi_operator,
                         solve_forward_bvp, solve_skorohod_bvp)
from poisson_bvp.paths import Rng, sample_path

PSI = BoundaryMap.clamped(-0.5, 1.0, -2.0, 2.0)


def _nonlinear():
    return CoefficientField.sine(0.4, -0.2, {"poly": [0.3, -0.5]}), CoefficientField.tanh(0.3, 0.2, 0.1)


def test_empty_point_is_deterministic_problem():
    f, F = _nonlinear()
    traj = solve_skorohod_bvp(f, F, PSI, EMPTY)
    assert traj.x0 == pytest.approx(deterministic_fixed_point(f - F, PSI), abs=1e-9)


def test_zero_jump_coefficient():
    f, _ = _nonlinear()
    Z = CoefficientField.zero()
    for times in [(0.4,), (0.2, 0.5, 0.9)]:
        a = solve_skorohod_bvp(f, Z, PSI, JumpPath(times))
        b = solve_forward_bvp(f, Z, PSI, JumpPath())
        assert a.x0 == pytest.approx(b.x0, abs=1e-12)


def test_x_free_conversion_random():
    g = np.random.default_rng(41)
    for k in range(15):
        F1 = {"poly": [float(g.uniform(-1, 1)), float(g.uniform(-1, 1))]}
        f = CoefficientField.sine(float(g.uniform(-0.5, 0.5)), float(g.uniform(-0.5, 0.5)), float(g.uniform(-1, 1)))
        F = CoefficientField.linear(F1, 0.0)
        om = sample_path(Rng(410, k))
        a = solve_skorohod_bvp(f, F, PSI, om)
        b = solve_forward_bvp(f - F, F, PSI, om)
        for t in np.linspace(0, 1, 21):
            assert abs(a(t) - b(t)) < 1e-8


def test_constant_psi_conversion():
    f, F = _nonlinear()
    psi = BoundaryMap.constant(0.7)
    for k in range(5):
        om = sample_path(Rng(420, k))
        a = solve_skorohod_bvp(f, F, psi, om)
        b = solve_forward_bvp(f - F, F, psi, om)
        assert abs(a.x1 - b.x1) < 1e-8


def test_linear_closed_form():
    lc = LinearCoefficients.of(0.3, -0.2, 0.4, 0.3)
    psi = BoundaryMap.tanh(0.5, 0.6)
    f, F = lc.fields()
    ls = LinearSkorohod(lc, psi)
    memo = {}
    for times in [(), (0.5,), (0.2, 0.7), (0.1, 0.4, 0.8), (0.15, 0.3, 0.55, 0.9)]:
        om = JumpPath(times)
        traj = solve_skorohod_bvp(f, F, psi, om, memo=memo)
        for t in np.linspace(0, 1, 11):
            assert abs(traj(t) - ls.value(om, t)) < 1e-8


def test_level_sandwich():
    f, F = _nonlinear()
    Kt = f.lipschitz + F.lipschitz
    solver = SkorohodSolver(f, F, PSI)
    g = np.random.default_rng(43)
    for n in range(4):
        om = JumpPath(tuple(np.sort(g.uniform(0.05, 0.95, n))))
        x1, x2 = sorted(g.uniform(-2, 2, 2))
        a, b = solver.level_trajectory(om, x1), solver.level_trajectory(om, x2)
        for t in np.linspace(0, 1, 11):
            d = b(t) - a(t)
            assert (x2 - x1) * math.exp(-Kt * t) <= d <= (x2 - x1) * math.exp(Kt * t)


def test_injections_do_not_depend_on_top_level_psi():
    f, F = _nonlinear()
    om = JumpPath((0.3, 0.6))
    s1 = SkorohodSolver(f, F, PSI)
    t1 = s1.solve(om)
    shared = {k: v for k, v in s1.memo.items() if k != om.times}
    s2 = SkorohodSolver(f, F, BoundaryMap.clamped(-0.2, -1.0, -2.0, 2.0), memo=shared)
    t2 = s2.solve(om)
    assert t2.meta["injections"] == t1.meta["injections"]
    assert t2.x0 != t1.x0
    # without the shared memo the lower levels change too
    t3 = SkorohodSolver(f, F, BoundaryMap.clamped(-0.2, -1.0, -2.0, 2.0)).solve(om)
    assert t3.meta["injections"] != t1.meta["injections"]


def test_memo_is_transparent_and_thread_safe():
    f, F = _nonlinear()
    oms = [sample_path(Rng(440, k)) for k in range(12)]
    fresh = [SkorohodSolver(f, F, PSI).solve(om).x0 for om in oms]
    solver = SkorohodSolver(f, F, PSI)
    with ThreadPoolExecutor(4) as ex:
        shared = list(ex.map(lambda om: solver.solve(om).x0, oms))
    assert shared == fresh


def test_h3_violation():
    f, F = _nonlinear()
    with pytest.raises(PreconditionError):
        SkorohodSolver(f, F, BoundaryMap.affine(-1.0, 0.0))
    with pytest.raises(PreconditionError):
        SkorohodSolver(f, F, BoundaryMap.clamped(0.9, 0.0, -1.0, 1.0))
    with pytest.raises(SpecError):
        parse_spec({"kind": "skorohod", "coefficients": {"linear": {"f2": 0.5}}, "psi": {"affine": {"a": -1, "b": 0}}})


def test_max_level():
    f, F = _nonlinear()
    solver = SkorohodSolver(f, F, PSI, max_level=2)
    with pytest.raises(ValueError):
        solver.solve(JumpPath((0.1, 0.2, 0.3)))
    H = CanonicalFunctional(len, max_level=1)
    assert H(JumpPath((0.5,))) == 1
    with pytest.raises(ValueError):
        H(JumpPath((0.2, 0.5)))


def test_preset_dispatch():
    p = preset("skorohod_linear")
    om = JumpPath((0.3, 0.6))
    assert p.solve(om).x0 == pytest.approx(LinearSkorohod(p.linear, p.psi).x0(om), abs=1e-8)


def test_phi_operator_examples():
    one = lambda t, om: 1.0
    for times in [(), (0.4,), (0.1, 0.5, 0.8)]:
        assert phi_operator(one, JumpPath(times)) == pytest.approx(len(times) - 1.0, abs=1e-12)
    assert phi_operator(lambda t, om: t, JumpPath((0.3, 0.7))) == pytest.approx(0.5, abs=1e-12)


def test_psi_operator_examples():
    om = JumpPath((0.2, 0.6))
    assert psi_operator(lambda w: 3.0, 0.4, om) == 0.0
    assert psi_operator(len, 0.4, om) == 1
    ind = lambda w: 1.0 if w.is_empty else 0.0
    assert psi_operator(ind, 0.5, EMPTY) == -1.0
    assert psi_operator(ind, 0.5, om) == 0.0
    with pytest.raises(ValueError):
        psi_operator(len, 0.6, om)
