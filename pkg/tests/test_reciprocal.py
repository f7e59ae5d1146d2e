import numpy as np
import pytest

from poisson_bvp import (BoundaryMap, LinearCoefficients, PreconditionError, ci_permutation_test,
                         markov_chain_check_case5, preset, representation_check_case3,
                         representation_check_case4)
from poisson_bvp.paths import Rng
from poisson_bvp.reciprocal import dcov2, discretize, reciprocal_samples


def _dcov2_brute(x, y):
    a = np.abs(x[:, None] - x[None, :])
    b = np.abs(y[:, None] - y[None, :])
    A = a - a.mean(0) - a.mean(1)[:, None] + a.mean()
    B = b - b.mean(0) - b.mean(1)[:, None] + b.mean()
    return float((A * B).mean())


@pytest.mark.parametrize("n", [2, 7, 300])
def test_dcov2_matches_quadratic_formula(n):
    g = np.random.default_rng(n)
    x = g.normal(size=n)
    y = x ** 2 + g.normal(size=n)
    assert dcov2(x, y) == pytest.approx(_dcov2_brute(x, y), rel=1e-10, abs=1e-14)
    # heavy ties
    xi = g.integers(0, 3, n).astype(float)
    yi = g.integers(0, 2, n).astype(float)
    assert dcov2(xi, yi) == pytest.approx(_dcov2_brute(xi, yi), rel=1e-10, abs=1e-14)


def test_discretize_levels_and_bins():
    v = np.repeat([0.0, 1.5, 3.0], 10) * (1 + 1e-12)
    lab, exact = discretize(v)
    assert exact and sorted(set(lab)) == [0, 1, 2]
    w = np.random.default_rng(0).normal(size=1000)
    lab, exact = discretize(w, bins=4)
    assert not exact
    assert np.all(np.bincount(lab) == 250)


def _synthetic(rep, dependent=False, n=10_000):
    g = Rng(777, rep).generator()
    xa = g.integers(0, 4, n).astype(float)
    xb = g.integers(0, 4, n).astype(float)
    xu = xa + xb + g.normal(size=n)
    xv = xu + 2.0 * g.normal(size=n) if dependent else xa * xb + g.exponential(size=n)
    return np.stack([xa, xu, xb, xv], 1)


def test_ci_report_structure():
    rep = ci_permutation_test(_synthetic(0), alpha=0.05, seed=1)
    assert rep.bins == 16 and rep.exact_cells == (True, True)
    assert all(0 < p <= 1 for p in rep.p_values)
    d = rep.to_dict()
    assert d["verdict"] in ("pass", "reject")
    assert set(d["times"]) == {"a", "u", "b", "v"}


def test_ci_power_on_dependent_data():
    rep = ci_permutation_test(_synthetic(5, dependent=True), alpha=0.01, seed=2)
    assert rep.rejected


def test_ci_deterministic_given_seed():
    S = _synthetic(3)
    assert ci_permutation_test(S, seed=4).to_json() == ci_permutation_test(S, seed=4).to_json()


def test_small_cells_skipped_and_constant_cells():
    S = _synthetic(6)
    S[:30, 0] = 9.0  # a tiny extra cell
    S[:30, 2] = 9.0
    rep = ci_permutation_test(S, seed=0)
    assert any(c["n"] == 30 for c in rep.skipped)
    T = S.copy()
    T[:, 3] = 1.0
    assert all(p == 1.0 for p in ci_permutation_test(T, seed=0).p_values)


def test_ci_input_errors():
    S = _synthetic(7)
    with pytest.raises(ValueError):
        ci_permutation_test(S, times=(0.3, 0.9, 0.5, 0.7))
    with pytest.raises(ValueError):
        ci_permutation_test(S[:500])
    with pytest.raises(ValueError):
        ci_permutation_test(S[:, :3])
    T = S.copy()
    T[0, 1] = np.nan
    with pytest.raises(ValueError):
        ci_permutation_test(T)


def test_case_samples_are_discrete():
    # the case presets have count-driven laws: few distinct values per time
    X = reciprocal_samples(preset("case3"), 2000, seed=1)
    for col in X.T:
        assert discretize(col)[1]


def test_structural_checks():
    p3, p4, p5 = preset("case3"), preset("case4"), preset("case5")
    assert representation_check_case3(p3.linear, p3.psi, n_paths=200)["ok"]
    assert representation_check_case4(p4.linear, p4.psi, n_paths=200)["ok"]
    # negative control: the case-3 representation needs F2 = 0
    assert not representation_check_case3(p4.linear, p4.psi, n_paths=200)["ok"]
    rep = markov_chain_check_case5(p5.linear, p5.psi, n_paths=5000)
    assert rep["ok"] and rep["outside_support"] == 0
    with pytest.raises(PreconditionError):
        representation_check_case4(p4.linear, BoundaryMap.affine(-1.0, 0.0))
    with pytest.raises(PreconditionError):
        representation_check_case4(LinearCoefficients.of(F2=-1.0), p4.psi)
