"""Deterministic and stochastic flows of ``dX = f(t, X) dt + F(t, X-) dN``.

Between jumps the state follows the ODE ``y' = f(t, y)`` (fixed-step RK4);
at a jump ``s_i`` it moves by ``y -> y + F(s_i, y)``.  Derivatives in the
starting point, the end time and the jump instants are assembled from the
linearised equation along the stored trajectory.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NumericalOverflow
from .fields import CoefficientField
from .paths import JumpPath
from .trajectory import Segment, Trajectory, rk4_nodes, simpson

__all__ = [
    "FlowResult",
    "integrate_path",
    "det_flow",
    "det_flow_partials",
    "forward_flow",
    "flow_x_derivative",
    "flow_jump_derivative",
    "verify_change_of_variables",
    "growth_bound",
    "sandwich_bounds",
]

DEFAULT_STEP = 1e-3


@dataclass
class FlowResult:
    value: float
    path: JumpPath
    s: float
    t: float
    x: float
    trajectory: Trajectory

    def __float__(self):
        return float(self.value)


def _check_interval(s, t):
    if not s <= t:
        raise ValueError(f"need s <= t, got s={s}, t={t}")


def integrate_path(drift: Callable, jump: Optional[Callable], jumps, s: float, t: float,
                   x: float, h: float = DEFAULT_STEP) -> Trajectory:
    """Solve ODE pieces between ``jumps`` (already restricted to ``(s, t]``).

    ``jump(r, y_left)`` returns the post-jump value; ``drift`` is the raw
    ``(t, y)`` callable.
    """
    if not h > 0:
        raise ValueError("ode_step must be positive")
    segs, left, right = [], [], []
    a, y = s, float(x)
    for r in jumps:
        ts, ys = rk4_nodes(drift, a, r, y, h)
        segs.append(Segment(a, r, ts, ys))
        yl = ys[-1]
        y = float(jump(r, yl))
        if not math.isfinite(y):
            raise NumericalOverflow(f"non-finite jump value at s={r}")
        left.append(yl)
        right.append(y)
        a = r
    ts, ys = rk4_nodes(drift, a, t, y, h)
    segs.append(Segment(a, t, ts, ys))
    return Trajectory(float(x), None, tuple(jumps), left, right, segs, drift, start=s, end=t,
                      meta={"ode_step": h})


def _jumps_in(path: JumpPath, s: float, t: float) -> tuple:
    lo = bisect.bisect_right(path.times, s)
    hi = bisect.bisect_right(path.times, t)
    return path.times[lo:hi]


def _forward_jump(F: CoefficientField):
    Fe = F.eval
    return lambda r, y: y + Fe(r, y)


def flow_trajectory(f: CoefficientField, F: CoefficientField, path: JumpPath, s: float,
                    t: float, x: float, ode_step: float = DEFAULT_STEP) -> Trajectory:
    _check_interval(s, t)
    traj = integrate_path(f.eval, _forward_jump(F), _jumps_in(path, s, t), s, t, x, ode_step)
    traj.path = path
    return traj


def det_flow(f: CoefficientField, s: float, t: float, x: float,
             ode_step: float = DEFAULT_STEP) -> float:
    """``Phi(s, t; x)``: RK4 solution of ``y' = f(r, y)``, ``y(s) = x``."""
    _check_interval(s, t)
    if not ode_step > 0:
        raise ValueError("ode_step must be positive")
    return rk4_nodes(f.eval, s, t, float(x), ode_step)[1][-1]


def _exponent(d2, seg: Segment) -> float:
    if len(seg.times) < 2:
        return 0.0
    return simpson(d2(np.asarray(seg.times), np.asarray(seg.values)), seg.dt)


def det_flow_partials(f: CoefficientField, s: float, t: float, x: float,
                      ode_step: float = DEFAULT_STEP):
    """``(d/ds, d/dt, d/dx)`` of ``Phi(s, t; x)``."""
    f.require("d2")
    _check_interval(s, t)
    ts, ys = rk4_nodes(f.eval, s, t, float(x), ode_step)
    e = math.exp(_exponent(f.d2, Segment(s, t, ts, ys)))
    return (-f.eval(s, float(x)) * e, f.eval(t, ys[-1]), e)


def forward_flow(f: CoefficientField, F: CoefficientField, path: JumpPath, s: float, t: float,
                 x: float, ode_step: float = DEFAULT_STEP) -> FlowResult:
    """``phi_st(x)``: ODE between jumps, ``y -> y + F(s_i, y)`` at each jump in ``(s, t]``."""
    traj = flow_trajectory(f, F, path, s, t, x, ode_step)
    return FlowResult(traj.x_end, path, s, t, float(x), traj)


def _x_derivative_from(traj: Trajectory, f: CoefficientField, F: CoefficientField, k0: int) -> float:
    """Linearised flow from the start of segment ``k0`` to the end."""
    expo = sum(_exponent(f.d2, seg) for seg in traj.segments[k0:])
    prod = 1.0
    for r, yl in zip(traj.jump_times[k0:], traj.left[k0:]):
        prod *= 1.0 + F.d2(r, yl)
    return math.exp(expo) * prod


def flow_x_derivative(f: CoefficientField, F: CoefficientField, path: JumpPath, s: float,
                      t: float, x: float, ode_step: float = DEFAULT_STEP) -> float:
    """``d phi_st(x) / dx``."""
    f.require("d2")
    F.require("d2")
    traj = flow_trajectory(f, F, path, s, t, x, ode_step)
    return _x_derivative_from(traj, f, F, 0)


def jump_bracket(f: CoefficientField, F: CoefficientField, r: float, yl: float, yr: float) -> float:
    """Instantaneous effect of moving a jump: ``-f(r, y+) + f(r, y-)(1 + F_x) + F_t``."""
    return -f.eval(r, yr) + f.eval(r, yl) * (1.0 + F.d2(r, yl)) + F.d1(r, yl)


def flow_jump_derivative(f: CoefficientField, F: CoefficientField, path: JumpPath, s: float,
                         t: float, x: float, j: int, ode_step: float = DEFAULT_STEP) -> float:
    """``d phi_st(x) / d s_j`` (``j`` is 1-based); zero if ``s_j`` is outside ``(s, t]``."""
    if not 1 <= j <= len(path):
        raise ValueError(f"jump index {j} out of range 1..{len(path)}")
    f.require("d2")
    F.require("d1", "d2")
    sj = path.times[j - 1]
    if not s < sj <= t:
        return 0.0
    traj = flow_trajectory(f, F, path, s, t, x, ode_step)
    i = traj.jump_index(sj)
    tail = _x_derivative_from(traj, f, F, i + 1)
    return tail * jump_bracket(f, F, sj, traj.left[i], traj.right[i])


def verify_change_of_variables(G, f: CoefficientField, F: CoefficientField, path: JumpPath,
                               s: float, t: float, x: float,
                               ode_step: float = DEFAULT_STEP) -> float:
    """Residual of the change-of-variables formula for ``G(r, phi_sr(x))``.

    ``G`` needs ``eval``, ``d1`` and ``d2`` (a :class:`CoefficientField`
    will do).  Used as a self-test of the integrator.
    """
    traj = flow_trajectory(f, F, path, s, t, x, ode_step)
    fe = f.eval

    def integrand(r, y):
        return G.d1(r, y) + G.d2(r, y) * fe(r, y)

    total = sum(_exponent(integrand, seg) for seg in traj.segments)
    jumps = sum(G.eval(r, yr) - G.eval(r, yl)
                for r, yl, yr in zip(traj.jump_times, traj.left, traj.right))
    return abs(G.eval(t, traj.x_end) - G.eval(s, float(x)) - total - jumps)


def growth_bound(f: CoefficientField, F: CoefficientField, x: float, n_jumps: int) -> float:
    """``[|x| + (M1 + M2)(n + 1)] (1 + K2)^n e^{K1}``."""
    for fld in (f, F):
        if fld.lipschitz is None or fld.sup_at_zero is None:
            raise ValueError("growth bound needs declared Lipschitz and sup-at-zero constants")
    return ((abs(x) + (f.sup_at_zero + F.sup_at_zero) * (n_jumps + 1))
            * (1.0 + F.lipschitz) ** n_jumps * math.exp(f.lipschitz))


def sandwich_bounds(f: CoefficientField, F: Optional[CoefficientField], n_jumps: int,
                    length: float):
    """Lower and upper bounds on the difference quotient of ``x -> phi_st(x)``.

    Uses ``(1 + k2)^n e^{-K1 (t-s)}`` and ``(1 + K2)^n e^{K1 (t-s)}`` with
    ``0^0 = 1``; ``F = None`` gives the deterministic flow bounds.
    """
    K1 = f.lipschitz
    lo = math.exp(-K1 * length)
    hi = math.exp(K1 * length)
    if F is not None and n_jumps:
        lo *= (1.0 + F.slope_lo) ** n_jumps
        hi *= (1.0 + F.lipschitz) ** n_jumps
    return lo, hi
