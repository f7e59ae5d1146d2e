import math

import numpy as np
import pytest

from poisson_bvp import (CapabilityError, CoefficientField, PreconditionError, check_carlen_pardoux,
                         check_condition_P, det_flow, estimate_flow_law, estimate_law, ks_stratified_test,
                         preset)
from poisson_bvp.law import conditional_bvp_samples, conditional_flow_samples


def test_trivial_problem_is_a_point_mass():
    est = estimate_law(preset("trivial"), 0.6, 2000, seed=3)
    assert est.atom_location == pytest.approx(1.0)
    assert est.atom_mass_hat == 1.0


def test_atom_and_strata_law_preset():
    p = preset("law")
    n = 20_000
    est = estimate_law(p, 1.0, n, seed=4)
    se = math.sqrt(math.exp(-1) * (1 - math.exp(-1)) / n)
    assert abs(est.atom_mass_hat - math.exp(-1)) < 4 * se
    assert est.atom_mass_hat + est.continuous_fraction == 1.0
    assert est.atom_location == pytest.approx(det_flow(p.drift, 0, 1, p.xstar()))
    # stratum weights: P{N_t = k} = e^{-t} t^k / k!  (t = 1 so N_1 - N_t = 0)
    for k in range(5):
        frac = np.mean(est.counts[:, 0] == k)
        pk = math.exp(-1) / math.factorial(k)
        assert abs(frac - pk) < 3 * math.sqrt(pk * (1 - pk) / n)
    # the atom sits exactly on the jump-free paths
    assert np.array_equal(est.is_atom, est.counts[:, 1] == 0)


def test_atom_at_time_zero():
    p = preset("law")
    est = estimate_law(p, 0.0, 10_000, seed=5)
    assert est.atom_location == pytest.approx(p.xstar())
    assert abs(est.atom_mass_hat - math.exp(-1)) < 0.02
    # at t = 0 every stratum has N_t = 0
    assert all(k[0] == 0 for k in est.strata)


def test_atom_location_independent_of_sampling():
    p = preset("law")
    a = estimate_law(p, 0.4, 500, seed=1)
    b = estimate_law(p, 0.4, 900, seed=2)
    assert a.atom_location == b.atom_location


def test_halves_agree():
    p = preset("law")
    est = estimate_law(p, 0.7, 20_000, seed=6)
    h = est.is_atom.reshape(2, -1).mean(axis=1)
    se = math.sqrt(2 * math.exp(-1) * (1 - math.exp(-1)) / 10_000)
    assert abs(h[0] - h[1]) < 6 * se


def test_flow_law_atom():
    f = CoefficientField.linear(0.0, 1.0)
    F = CoefficientField.constant(1.0)
    est = estimate_flow_law(f, F, 0.0, 0.5, 20_000, seed=7)
    assert abs(est.atom_mass_hat - math.exp(-0.5)) < 4 * math.sqrt(0.25 / 20_000)
    assert est.meta["expected_atom_mass"] == pytest.approx(math.exp(-0.5))


def test_constant_jump_stratum_is_degenerate():
    # f = 0, F = 1, x = 0: X_t = N_t, so every stratum is a point
    est = estimate_flow_law(CoefficientField.zero(), CoefficientField.constant(1.0), 0.0, 1.0, 3000, seed=8)
    assert (1,) in est.degenerate
    assert (1,) not in est.conditional_kde
    assert np.all(est.stratum_samples((1,)) == 1.0)
    out = ks_stratified_test(est, est)
    assert "skipped" in out["1"]


def test_rng_argument_forms_and_worker_invariance():
    p = preset("law")
    a = estimate_law(p, 0.5, 400, seed=9)
    b = estimate_law(p, 0.5, 400, rng=9, workers=3)
    assert np.array_equal(a.values, b.values)
    c = estimate_law(p, 0.5, 400, rng=np.random.default_rng(9))
    assert len(c.values) == 400
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == "path_id,N_t,N1,X_t,is_atom"


def test_ks_shift_power_and_conditional_reference():
    f = CoefficientField.linear(0.0, 1.0)
    F = CoefficientField.linear(0.3, 0.5)
    est = estimate_flow_law(f, F, 0.2, 1.0, 6000, seed=10)
    g = np.random.default_rng(11)
    same = ks_stratified_test(est, lambda key, n: conditional_flow_samples(f, F, 0.2, 1.0, key[0], 1000, g))
    shifted = ks_stratified_test(est, lambda key, n: conditional_flow_samples(f, F, 0.2, 1.0, key[0], 1000, g) + 0.5)
    tested = [k for k, v in same.items() if "p" in v]
    assert tested
    for k in tested:
        assert same[k]["p"] > 1e-3
        assert shifted[k]["p"] < 1e-3


def test_law_preset_strata_are_points():
    # f = F = 1 + x/2 makes the condition-P expression vanish: each stratum is one value
    p = preset("law")
    assert not check_condition_P(p.f, p.F)["ok"]
    est = estimate_law(p, 0.5, 2000, seed=14)
    assert sorted(est.degenerate) == sorted(est.strata)


def test_conditional_bvp_reference():
    p = preset("case3_continuous")
    assert check_condition_P(p.f, p.F)["ok"]
    est = estimate_law(p, 0.5, 8000, seed=12)
    g = np.random.default_rng(13)
    out = ks_stratified_test(est, lambda key, n: conditional_bvp_samples(p, 0.5, key, 600, g))
    ps = [v["p"] for v in out.values() if "p" in v]
    assert len(ps) >= 3
    assert min(ps) > 1e-3


@pytest.mark.slow
def test_ks_self_consistency_rate():
    # two independent runs of the same law: reject rate 0.05 +- 0.02 over 200 repetitions
    f = CoefficientField.linear(0.0, 1.0)
    F = CoefficientField.linear(0.3, 0.5)
    rej, n = 0, 0
    for r in range(200):
        a = estimate_flow_law(f, F, 0.2, 1.0, 800, seed=1000 + 2 * r)
        b = estimate_flow_law(f, F, 0.2, 1.0, 800, seed=1001 + 2 * r)
        res = ks_stratified_test(a, b, alpha=0.05)["1"]
        if "p" in res:
            n += 1
            rej += res["reject"]
    assert n >= 150
    assert 0.03 <= rej / n <= 0.07


def test_condition_P_examples():
    t = np.linspace(0, 1, 5)
    x = np.linspace(-3, 3, 31)
    ok = check_condition_P(CoefficientField.linear(0.0, 1.0), CoefficientField.constant(1.0), t, x)
    assert ok["ok"] and ok["min"] == pytest.approx(1.0)
    ok = check_condition_P(CoefficientField.zero(), CoefficientField.linear({"poly": [0.0, 1.0]}, 0.0), t, x)
    assert ok["ok"] and ok["min"] == pytest.approx(1.0)
    assert not check_condition_P(CoefficientField.zero(), CoefficientField.constant(1.0), t, x)["ok"]
    with pytest.raises(CapabilityError):
        check_condition_P(CoefficientField.zero(), CoefficientField.constant(1.0).without_partials())


def test_carlen_pardoux_examples():
    assert check_carlen_pardoux(CoefficientField.linear(0.0, 1.0), CoefficientField.constant(1.0))["ok"]
    assert not check_carlen_pardoux(CoefficientField.zero(), CoefficientField.constant(1.0))["ok"]
    rep = check_carlen_pardoux(CoefficientField.sine(1.0), CoefficientField.constant(0.5),
                               np.linspace(0, 3, 3001))
    assert not rep["ok"]
    assert rep["argmin"] == pytest.approx(math.pi / 2, abs=2e-3)
    with pytest.raises(PreconditionError):
        check_carlen_pardoux(CoefficientField.sine(1.0, drift={"poly": [0, 1]}), CoefficientField.constant(0.5))
