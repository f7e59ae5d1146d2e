import math
from fractions import Fraction

import numpy as np
import pytest

from poisson_bvp import (EMPTY, CapabilityError, ChaosSeries, ChaosTerm, ConstKernel, FunctionKernel,
                         IndicatorKernel, JumpPath, TimeFunction, build_case5_chaos, build_first_order_chaos,
                         charlier, eval_chaos, phi_operator, preset, skorohod_integral_series,
                         solve_linear_bvp)
from poisson_bvp.chaos import charlier_exact, multiple_integral
from poisson_bvp.fields import _neg
from poisson_bvp.linear import LinearCoefficients
from poisson_bvp.montecarlo import sample_paths


@pytest.mark.parametrize("s", [Fraction(1), Fraction(3, 7), Fraction(1, 10)])
@pytest.mark.parametrize("count", [0, 1, 2, 5, 10])
def test_charlier_recurrence_vs_exact(s, count):
    # series weights are c / n!, so the error that matters is scaled by 1/n!
    vals = charlier(30, float(s), count)
    for n in range(31):
        exact = float(charlier_exact(n, s, count))
        assert abs(vals[n] - exact) / math.factorial(n) < 1e-12


def test_single_jump_low_orders():
    # I_1(1) = N_1 - 1, I_2(1) = N(N-1) - 2N + 1
    om = JumpPath((0.3, 0.8))
    assert multiple_integral(1, ConstKernel(), om) == 1.0
    assert multiple_integral(2, ConstKernel(), om) == pytest.approx(2 - 4 + 1)


def _indicator_of_a(order):
    return ChaosSeries([ChaosTerm(n, math.exp(-1) * (-1) ** n / math.factorial(n), ConstKernel())
                        for n in range(order + 1)], order, [(math.exp(-1), 1.0)])


def test_indicator_identity():
    ser = _indicator_of_a(30)
    for om in [EMPTY] + sample_paths(51, 300):
        assert abs(ser(om) - (1.0 if om.is_empty else 0.0)) < 1e-9


def test_truncation_within_tail_bound():
    lo, hi = _indicator_of_a(10), _indicator_of_a(30)
    # at omega = a the order-10 tail is e^{-1} sum_{n > 10} 1/n!
    tail = math.exp(-1) * sum(1 / math.factorial(n) for n in range(11, 40))
    assert abs(lo(EMPTY) - hi(EMPTY)) == pytest.approx(tail, rel=1e-6)
    for n in range(6):
        om = JumpPath(tuple(np.linspace(0.1, 0.9, n))) if n else EMPTY
        # the bound is tight at omega = a; allow for rounding in the partial sums
        assert abs(lo(om) - hi(om)) <= lo.tail_bound(om) + 1e-15
        assert hi.tail_bound(om) < 1e-22


def test_case5_endpoints():
    f2 = TimeFunction.const(0.5)
    psi0, xstar = 1.0, 0.37
    s0 = build_case5_chaos(f2, psi0, xstar, 0.0)
    s1 = build_case5_chaos(f2, psi0, xstar, 1.0)
    for om in [EMPTY, JumpPath((0.4,)), JumpPath((0.2, 0.9))]:
        assert s0(om) == pytest.approx(psi0 + (xstar - psi0) * om.is_empty, abs=1e-12)
        assert s1(om) == pytest.approx(math.exp(0.5) * xstar * om.is_empty, abs=1e-12)


def test_case5_matches_pathwise():
    p = preset("chaos_case5")
    lc, psi = p.linear, p.psi
    for t in (0.2, 0.5, 0.85):
        ser = build_case5_chaos(lc.f2, float(psi.eval(0.0)), p.xstar(), t)
        for om in sample_paths(52, 200):
            assert abs(ser(om) - solve_linear_bvp(lc, psi, om)(t)) < 1e-8
            assert ser.tail_bound(om) < 1e-8


def test_tail_bound_flags_low_order():
    ser = build_case5_chaos(TimeFunction.const(0.5), 1.0, 0.3, 0.5, order=2)
    assert ser.tail_bound(JumpPath((0.1, 0.3, 0.7))) > 1e-3


def test_first_order_example():
    p = preset("chaos_first_order")
    lc, psi = p.linear, p.psi
    a, b = float(psi.dpsi(0.0)), float(psi.eval(0.0))
    conv = LinearCoefficients(TimeFunction.sum(lc.f1, _neg(lc.F1)), lc.f2, lc.F1, lc.F2)
    for t in (0.0, 0.3, 1.0):
        ser = build_first_order_chaos(lc, a, b, t)
        for om in sample_paths(53, 100):
            assert abs(ser(om) - solve_linear_bvp(conv, psi, om)(t)) < 1e-8
    with pytest.raises(CapabilityError):
        build_first_order_chaos(LinearCoefficients.of(F2=0.5), a, b, 0.5)


def test_skorohod_duality():
    coeffs = [0.7, -1.2, 0.4]

    def u(t, om):
        c = charlier(len(coeffs) - 1, t, om.count(0.0, t))
        return float(np.dot(coeffs, c))

    ser = skorohod_integral_series(coeffs)
    for om in sample_paths(54, 100):
        assert abs(phi_operator(u, om) - eval_chaos(ser, om)) < 1e-9


def test_json_roundtrip_and_errors():
    ser = build_case5_chaos(TimeFunction.const(0.2), 0.5, 1.1, 0.4, order=5)
    text = ser.to_json()
    back = ChaosSeries.from_json(text)
    assert back.to_json() == text
    om = JumpPath((0.1, 0.6))
    assert back(om) == pytest.approx(ser(om), abs=1e-15)
    rec = __import__("json").loads(text)
    assert {"n", "c_n", "kernel"} == set(rec[0])
    assert any(r["kernel"] == {"indicator": 0.4} for r in rec)
    with pytest.raises(CapabilityError):
        ChaosSeries([ChaosTerm(1, 1.0, FunctionKernel(lambda r: r, 0.5))]).to_json()
    with pytest.raises(CapabilityError):
        ChaosSeries.from_json('[{"n": 1, "c_n": 1.0, "kernel": "gauss"}]')
    with pytest.raises(CapabilityError):
        multiple_integral(2, FunctionKernel(lambda r: r, 0.5), om)
    assert IndicatorKernel(0.3).s == 0.3
