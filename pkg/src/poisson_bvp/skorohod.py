"""Skorohod boundary problems on the canonical Poisson space.

A point ``omega = (s_1, ..., s_n)`` carries its own level-``n`` solution:
the ODE with drift ``f - F`` plus constant injections
``F(s_j, X^{n-1}_{s_j}(omega minus s_j))`` at each ``s_j``.  Lower levels are
computed on demand and memoised by their jump tuple.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .boundary import DEFAULT_TOL, _solve, find_fixed_point
from .errors import PreconditionError
from .fields import BoundaryMap, CoefficientField
from .flow import DEFAULT_STEP, integrate_path
from .fields import _neg
from .linear import DEFAULT_QUAD, LinearCoefficients, LinearPathSolution
from .paths import JumpPath, insert_jump, remove_jump
from .trajectory import Trajectory, n_steps, simpson

__all__ = [
    "CanonicalFunctional",
    "SkorohodSolver",
    "solve_skorohod_bvp",
    "check_h3_skorohod",
    "phi_operator",
    "psi_operator",
    "LinearSkorohod",
]

MAX_LEVEL = 8


def check_h3_skorohod(f: CoefficientField, F: CoefficientField, psi: BoundaryMap) -> Optional[str]:
    """``None`` if ``psi`` is bounded with a one-sided slope beyond ``e^{-+(K1+K2)}``."""
    if f.lipschitz is None or F.lipschitz is None:
        return "Skorohod solver needs declared Lipschitz constants for f and F"
    if psi.bound is None:
        return "Skorohod solver needs a bounded psi"
    Kt = f.lipschitz + F.lipschitz
    if psi.slope_hi is not None and psi.slope_hi < math.exp(-Kt):
        return None
    if psi.slope_lo is not None and psi.slope_lo > math.exp(Kt):
        return None
    return f"psi slopes do not satisfy eta < e^-{Kt:g} or eta > e^{Kt:g}"


@dataclass(frozen=True)
class CanonicalFunctional:
    """A random variable written as a function of the canonical point."""

    eval: Callable[[JumpPath], float]
    max_level: float = math.inf

    def __call__(self, omega: JumpPath) -> float:
        if len(omega) > self.max_level:
            raise ValueError(f"functional only defined up to level {self.max_level}")
        return self.eval(omega)


class SkorohodSolver:
    """Level-by-level solver with a shared memo of sub-point solutions."""

    def __init__(self, f: CoefficientField, F: CoefficientField, psi: BoundaryMap,
                 tol: float = DEFAULT_TOL, ode_step: float = DEFAULT_STEP,
                 max_level: int = MAX_LEVEL, memo: Optional[dict] = None, check: bool = True):
        if check:
            msg = check_h3_skorohod(f, F, psi)
            if msg:
                raise PreconditionError(msg)
        self.f, self.F, self.psi = f, F, psi
        self.drift = f - F
        self.tol, self.ode_step, self.max_level = tol, ode_step, max_level
        self.memo = {} if memo is None else memo

    def injections(self, omega: JumpPath) -> dict:
        """``{s_j: F(s_j, X^{n-1}_{s_j}(omega_j))}`` from the level below."""
        Fe = self.F.eval
        out = {}
        for j, s in enumerate(omega.times, start=1):
            lower = self.solve(remove_jump(omega, j))
            out[s] = Fe(s, lower(s))
        return out

    def level_trajectory(self, omega: JumpPath, x: float) -> Trajectory:
        """``X^n(omega, x)``: the level equation started at ``x`` (no boundary condition)."""
        inj = self.injections(omega)
        traj = integrate_path(self.drift.eval, lambda r, y: y + inj[r], omega.times, 0.0, 1.0, x,
                              self.ode_step)
        traj.path = omega
        return traj

    def solve(self, omega: JumpPath) -> Trajectory:
        key = omega.times
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if len(omega) > self.max_level:
            raise ValueError(f"level {len(omega)} exceeds max_level={self.max_level}")
        inj = self.injections(omega)
        traj = _solve(self.drift, lambda r, y: y + inj[r], omega, self.psi, self.tol, self.ode_step)
        traj.meta["level"] = len(omega)
        traj.meta["injections"] = [inj[s] for s in omega.times]
        return self.memo.setdefault(key, traj)


def solve_skorohod_bvp(f: CoefficientField, F: CoefficientField, psi: BoundaryMap, omega: JumpPath,
                       tol: float = DEFAULT_TOL, ode_step: float = DEFAULT_STEP,
                       memo: Optional[dict] = None) -> Trajectory:
    """Skorohod solution at ``omega``; pass a dict as ``memo`` to reuse lower levels."""
    return SkorohodSolver(f, F, psi, tol, ode_step, memo=memo).solve(omega)


# operators on the canonical space ---------------------------------------------


def phi_operator(u: Callable[[float, JumpPath], float], omega: JumpPath,
                 quad_step: float = DEFAULT_QUAD) -> float:
    """``sum_j u_{s_j}(omega minus s_j) - int_0^1 u_t(omega) dt``.

    At ``omega = a`` the sum is empty.  The time integral is split at the
    jumps of ``omega``.
    """
    total = sum(u(s, remove_jump(omega, j)) for j, s in enumerate(omega.times, start=1))
    edges = (0.0,) + omega.times + (1.0,)
    integral = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        n = max(n_steps(b - a, quad_step), 2)
        ts = np.linspace(a, b, n + 1)
        # stay inside the open piece so u sees the right jump configuration
        ts[0] = a + 1e-12 * (b - a)
        ts[-1] = b - 1e-12 * (b - a)
        integral += simpson([u(float(t), omega) for t in ts], (b - a) / n)
    return total - integral


def psi_operator(H: Callable[[JumpPath], float], t: float, omega: JumpPath) -> float:
    """``H(omega + {t}) - H(omega)``; ``t`` must not already be a jump."""
    return H(insert_jump(omega, t)) - H(omega)


# linear Skorohod closed form ----------------------------------------------------


class LinearSkorohod:
    """Closed-form solution ``X = Y + Z`` of the linear Skorohod boundary problem.

    ``Y`` solves the forward equation with drift ``(f1-F1) + (f2-F2) y`` and
    jumps ``F1 + F2 y`` from ``Y_0 = 0``.  ``Z / A~`` is piecewise constant:
    after the jumps ``J`` up to ``t`` it equals ``Z_0(omega)`` plus, for each
    non-empty subset of ``J``, the product of ``F2`` over the subset times
    ``Z_0`` of ``omega`` with that subset removed.
    """

    def __init__(self, lc: LinearCoefficients, psi: BoundaryMap, tol: float = DEFAULT_TOL,
                 quad_step: float = DEFAULT_QUAD):
        self.lc, self.psi, self.tol, self.quad_step = lc, psi, tol, quad_step
        from .fields import TimeFunction

        self.ylc = LinearCoefficients(
            TimeFunction.sum(lc.f1, _neg(lc.F1)), TimeFunction.sum(lc.f2, _neg(lc.F2)), lc.F1, lc.F2)
        self.f2t = TimeFunction.sum(lc.f2, _neg(lc.F2))
        self._z0 = {}
        self._y = {}

    def A_tilde(self, t: float) -> float:
        return math.exp(self.f2t.integral(0.0, t))

    def Y(self, omega: JumpPath) -> LinearPathSolution:
        sol = self._y.get(omega.times)
        if sol is None:
            sol = self._y[omega.times] = LinearPathSolution(self.ylc, omega, "forward", self.quad_step)
        return sol

    def _subset_sum(self, times: tuple, upto: int) -> float:
        # sum over non-empty subsets J of the first `upto` jumps
        F2 = self.lc.F2.fn
        total = 0.0
        idx = range(upto)
        for k in range(1, upto + 1):
            for J in itertools.combinations(idx, k):
                prod = math.prod(F2(times[j]) for j in J)
                rest = tuple(s for i, s in enumerate(times) if i not in J)
                total += prod * self.z0(JumpPath(rest))
        return total

    def z0(self, omega: JumpPath) -> float:
        key = omega.times
        if key in self._z0:
            return self._z0[key]
        S = self._subset_sum(key, len(key))
        A1 = self.A_tilde(1.0)
        Y1 = self.Y(omega).value(0.0, 1.0)
        pe = self.psi.eval
        x = find_fixed_point(lambda x: x - pe(A1 * (x + S) + Y1), self.tol)
        self._z0[key] = x
        return x

    def value(self, omega: JumpPath, t: float) -> float:
        i = omega.count(0.0, t)
        z = self.A_tilde(t) * (self.z0(omega) + self._subset_sum(omega.times, i))
        return self.Y(omega).value(0.0, t) + z

    def x0(self, omega: JumpPath) -> float:
        return self.value(omega, 0.0)
