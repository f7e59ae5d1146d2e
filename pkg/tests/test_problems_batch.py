import math

import numpy as np
import pytest

from poisson_bvp import (CoefficientField, JumpPath, SpecError, TimeFunction, parse_spec, preset,
                         solve_bvp_batch)
from poisson_bvp.montecarlo import MULTIPLE, NO_FIXED_POINT, OK, flow_batch, sample_paths


@pytest.mark.parametrize("desc,lo,hi", [
    (2.5, 2.5, 2.5),
    ({"poly": [1.0, -4.0, 4.0]}, 0.0, 1.0),
    ({"sin": {"amp": 2.0, "freq": 4.0}}, 2.0 * math.sin(4.0), 2.0),
    ({"cos": {"amp": 1.0, "freq": 1.0}}, math.cos(1.0), 1.0),
])
def test_time_function_ranges(desc, lo, hi):
    tf = TimeFunction.from_descriptor(desc)
    assert tf.lo == pytest.approx(lo, abs=1e-12) and tf.hi == pytest.approx(hi, abs=1e-12)
    grid = np.linspace(0, 1, 2001)
    v = np.array([tf(t) for t in grid])
    assert v.min() >= tf.lo - 1e-12 and v.max() <= tf.hi + 1e-12


def test_time_function_calculus():
    tf = TimeFunction.from_descriptor({"sum": [{"poly": [0.3, 1.2]}, {"sin": {"amp": 0.5, "freq": 3.0}}]})
    h = 1e-6
    assert tf.derivative(0.4) == pytest.approx((tf(0.4 + h) - tf(0.4 - h)) / (2 * h), rel=1e-8)
    from scipy.integrate import quad

    assert tf.integral(0.1, 0.9) == pytest.approx(quad(tf.fn, 0.1, 0.9)[0], rel=1e-12)
    with pytest.raises(ValueError):
        TimeFunction.from_descriptor({"exp": 1})


def test_declared_constants_hold():
    for fld in (CoefficientField.sine(0.7, -0.2, 0.3), CoefficientField.tanh(-0.4, 0.5),
                CoefficientField.linear({"poly": [1, 2]}, {"sin": {"amp": 0.5}})):
        assert fld.check_declared() == []


@pytest.mark.parametrize("spec", [
    {"coefficients": {"linear": {}}},
    {"coefficients": {"linear": {"g": 1}}, "psi": 0},
    {"coefficients": {"f": {"cubic": {}}, "F": {"linear": {}}}, "psi": 0},
    {"coefficients": {"linear": {}}, "psi": {"affine": {"a": 1}}},
    {"coefficients": {"linear": {}}, "psi": 0, "solver": {"tol": -1}},
    {"coefficients": {"linear": {}}, "psi": 0, "colour": "red"},
    {"coefficients": {"linear": {}}, "psi": {"affine": {"a": 0.5, "b": 0}}},
    {"kind": "sideways", "coefficients": {"linear": {}}, "psi": 0},
    {"preset": "nope"},
    "{not json",
])
def test_spec_errors(spec):
    with pytest.raises(SpecError):
        parse_spec(spec)


def test_presets_parse():
    from poisson_bvp import PRESETS

    for name in PRESETS:
        p = preset(name)
        assert p.name == name


def test_batch_matches_scalar_solver():
    p = preset("nonlinear")
    paths = sample_paths(61, 40)
    res = solve_bvp_batch(p.drift.eval, p.batch_jump(), p.psi.eval, paths, queries=(0.3, 1.0),
                          x_start=p.xstar())
    assert np.all(res.status == OK)
    for i, path in enumerate(paths):
        traj = p.solve(path)
        assert res.x0[i] == pytest.approx(traj.x0, abs=1e-9)
        assert res.values[i, 0] == pytest.approx(traj(0.3), abs=1e-9)


def test_batch_status_codes():
    paths = [JumpPath(), JumpPath((0.5,)), JumpPath((0.2, 0.4))]
    p = preset("counterexample")
    res = solve_bvp_batch(p.drift.eval, p.batch_jump(), p.psi.eval, paths)
    assert list(res.status) == [OK, NO_FIXED_POINT, OK]
    q = preset("counterexample_multiple")
    res = solve_bvp_batch(q.drift.eval, q.batch_jump(), q.psi.eval, paths)
    assert list(res.status) == [OK, MULTIPLE, OK]


def test_batch_worker_and_block_invariance():
    p = preset("law")
    paths = sample_paths(62, 3000)
    args = (p.drift.eval, p.batch_jump(), p.psi.eval, paths)
    a = solve_bvp_batch(*args, queries=(0.5,), x_start=p.xstar(), block=3000)
    b = solve_bvp_batch(*args, queries=(0.5,), x_start=p.xstar(), block=700, workers=4)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.x0, b.x0)
    Fe = p.F.eval
    c = flow_batch(p.f.eval, lambda r, y: y + Fe(r, y), paths, 0.3, queries=(0.5,), block=500, workers=3)
    d = flow_batch(p.f.eval, lambda r, y: y + Fe(r, y), paths, 0.3, queries=(0.5,))
    assert np.array_equal(c.values, d.values)
