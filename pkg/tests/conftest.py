import numpy as np
import pytest

from poisson_bvp import LinearCoefficients, TimeFunction, parse_spec


def _coef(g, lo=-2.0, hi=2.0):
    # constant or affine in t
    if g.random() < 0.5:
        return float(g.uniform(lo, hi))
    return {"poly": [float(g.uniform(lo, hi)), float(g.uniform(lo, hi))]}


def random_linear(g, backward=False):
    """Random linear coefficients with |parameters| <= 2, F2 in [-1, 1)."""
    while True:
        F2 = _coef(g)
        tf = TimeFunction.from_descriptor(F2)
        if tf.lo >= -1.0 and tf.hi < 1.0:
            break
    return LinearCoefficients.of(_coef(g), _coef(g), _coef(g), F2)


def random_smooth_problem(g, kind="forward"):
    """A generic nonlinear forward problem satisfying the hypotheses."""
    spec = {
        "kind": kind,
        "coefficients": {
            "f": {"sine": {"amp": float(g.uniform(-1, 1)), "slope": float(g.uniform(-1, 1)),
                           "drift": {"sin": {"amp": float(g.uniform(-1, 1)),
                                             "freq": float(g.uniform(0.5, 3))}}}},
            "F": {"tanh": {"amp": float(g.uniform(-0.5, 0.5)), "slope": float(g.uniform(-0.4, 0.5)),
                           "drift": {"poly": [float(g.uniform(-1, 1)), float(g.uniform(-1, 1))]}}},
        },
        "psi": {"tanh": {"c": float(g.uniform(-1, 1)), "k": float(g.uniform(0.1, 1.5))}},
    }
    return parse_spec(spec)


@pytest.fixture
def gen():
    return np.random.default_rng(20240601)
