"""Closed forms for linear coefficients ``f = f1 + f2 x``, ``F = F1 + F2 x``.

These are independent of the RK4 machinery (only time quadratures of
``f1/A`` are needed) and serve as the exactness oracle for the generic
solvers.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .boundary import DEFAULT_TOL, deterministic_fixed_point, find_fixed_point
from .errors import PreconditionError
from .fields import BoundaryMap, CoefficientField, TimeFunction
from .paths import JumpPath
from .trajectory import Trajectory, n_steps, simpson

__all__ = [
    "LinearCoefficients",
    "LinearFactors",
    "LinearPathSolution",
    "solve_linear_forward",
    "solve_linear_bvp",
    "solve_linear_backward",
    "deterministic_fixed_point",
]

DEFAULT_QUAD = 1e-3


@dataclass(frozen=True)
class LinearCoefficients:
    f1: TimeFunction
    f2: TimeFunction
    F1: TimeFunction
    F2: TimeFunction

    @classmethod
    def of(cls, f1=0.0, f2=0.0, F1=0.0, F2=0.0) -> "LinearCoefficients":
        tf = TimeFunction.from_descriptor
        return cls(tf(f1), tf(f2), tf(F1), tf(F2))

    def fields(self):
        """The drift and jump coefficients as :class:`CoefficientField` objects."""
        return (CoefficientField.linear(self.f1, self.f2, name="f"),
                CoefficientField.linear(self.F1, self.F2, name="F"))

    def backward_jump(self) -> "LinearCoefficients":
        """Coefficients of ``F~ = F1/(1-F2) + F2/(1-F2) x``."""
        F1, F2 = self.F1.fn, self.F2.fn
        lo, hi = self.F2.lo, self.F2.hi
        if hi >= 1.0:
            raise PreconditionError("backward linear problem needs F2 < 1")
        return LinearCoefficients(
            self.f1, self.f2,
            TimeFunction(lambda t: F1(t) / (1.0 - F2(t)), lo=-math.inf, hi=math.inf),
            TimeFunction(lambda t: F2(t) / (1.0 - F2(t)), lo=lo / (1.0 - lo), hi=hi / (1.0 - hi)),
        )


class LinearFactors:
    """``A(t) = exp(int_0^t f2)`` and ``eta_t = A(t) prod_{S_i <= t} (1 + F2(S_i))``."""

    def __init__(self, lc: LinearCoefficients, quad_step: float = DEFAULT_QUAD):
        self.lc = lc
        self.quad_step = quad_step

    def A(self, t):
        return np.exp(self.lc.f2.integral(0.0, t))

    def eta(self, t: float, path: JumpPath) -> float:
        k = bisect.bisect_right(path.times, t)
        F2 = self.lc.F2.fn
        return float(self.A(t)) * math.prod(1.0 + F2(s) for s in path.times[:k])

    def f1_over_A(self, a: float, b: float) -> float:
        """``int_a^b f1(r) / A(r) dr`` by composite Simpson."""
        if b <= a:
            return 0.0
        f1 = self.lc.f1
        if f1.is_constant and f1.lo == 0.0:
            return 0.0
        n = max(n_steps(b - a, self.quad_step), 2)
        r = np.linspace(a, b, n + 1)
        return simpson(f1.fn(r) / self.A(r), (b - a) / n)


class LinearPathSolution:
    """Closed-form ``x -> phi_t(x)`` on one path; affine in ``x``.

    ``mode`` is ``"forward"`` (jump ``y -> F1 + (1+F2) y``) or
    ``"backward"`` (jump ``y -> (y + F1) / (1 - F2)``).
    """

    def __init__(self, lc: LinearCoefficients, path: JumpPath, mode: str = "forward",
                 quad_step: float = DEFAULT_QUAD, form: str = "auto"):
        self.lc, self.path, self.mode = lc, path, mode
        self.fac = LinearFactors(lc, quad_step)
        F1, F2 = lc.F1.fn, lc.F2.fn
        s = path.times
        if mode == "forward":
            self.mult = [1.0 + F2(r) for r in s]
            self.add = [F1(r) for r in s]
        elif mode == "backward":
            den = [1.0 - F2(r) for r in s]
            if any(d <= 0.0 for d in den):
                raise PreconditionError("backward linear problem needs F2 < 1 at every jump")
            self.mult = [1.0 / d for d in den]
            self.add = [F1(r) / d for r, d in zip(s, den)]
        else:
            raise ValueError(f"unknown mode {mode!r}")
        self.A_s = [float(self.fac.A(r)) for r in s]
        edges = (0.0,) + s
        self.seg_int = [self.fac.f1_over_A(edges[k], edges[k + 1]) for k in range(len(s))]
        if form == "auto":
            form = "eta" if all(m != 0.0 for m in self.mult) else "telescoped"
        self.form = form

    def value(self, x: float, t: float, left: bool = False) -> float:
        """``phi_t(x)``, or ``phi_{t-}(x)`` when ``left`` is set."""
        s = self.path.times
        k = bisect.bisect_left(s, t) if left else bisect.bisect_right(s, t)
        tail = self.fac.f1_over_A(s[k - 1] if k else 0.0, t)
        At = float(self.fac.A(t))
        if self.form == "eta":
            return At * self._eta_bracket(x, k, tail)
        return At * self._telescoped(x, k, tail)

    def _telescoped(self, x, i, tail):
        # X_t / A(t) = sum_k c_k prod_{j>k} m_j with c_0 = x + int_0 f1/A
        seg = self.seg_int[:i] + [tail]
        c = [x + seg[0]] + [self.add[k] / self.A_s[k] + seg[k + 1] for k in range(i)]
        total = 0.0
        for k, ck in enumerate(c):
            total += ck * math.prod(self.mult[k:i])
        return total

    def _eta_bracket(self, x, i, tail):
        # eta_t [x + int_0^t f1/eta dr + sum F1(S_k)/eta_{S_k}], divided by A(t)
        P = 1.0
        acc = x + self.seg_int[0] if i else x + tail
        for k in range(i):
            P *= self.mult[k]
            nxt = self.seg_int[k + 1] if k + 1 < i else tail
            acc += self.add[k] / (self.A_s[k] * P) + nxt / P
        return P * acc

    def affine(self, t: float = 1.0):
        """``(slope, intercept)`` of ``x -> phi_t(x)``."""
        b = self.value(0.0, t)
        return self.value(1.0, t) - b, b

    def trajectory(self, x0: float) -> Trajectory:
        s = self.path.times
        left = [self.value(x0, r, left=True) for r in s]
        right = [self.value(x0, r) for r in s]
        return Trajectory(float(x0), self.path, s, left, right,
                          evaluator=lambda t: self.value(x0, t),
                          backward=self.mode == "backward", meta={"form": self.form})


def solve_linear_forward(lc: LinearCoefficients, path: JumpPath, x0: float,
                         quad_step: float = DEFAULT_QUAD) -> Trajectory:
    """Initial-value solution; the eta form when no ``F2(S_i) = -1``, else the telescoped sum."""
    return LinearPathSolution(lc, path, "forward", quad_step).trajectory(x0)


def _bvp(sol: LinearPathSolution, psi: BoundaryMap, tol: float) -> Trajectory:
    a, b = sol.affine(1.0)
    pe = psi.eval
    x0 = find_fixed_point(lambda x: x - pe(a * x + b), tol)
    traj = sol.trajectory(x0)
    traj.meta["residual"] = abs(x0 - pe(a * x0 + b))
    traj.meta["slope"] = a
    return traj


def solve_linear_bvp(lc: LinearCoefficients, psi: BoundaryMap, path: JumpPath,
                     tol: float = DEFAULT_TOL, quad_step: float = DEFAULT_QUAD) -> Trajectory:
    """Forward boundary problem; ``phi_1`` is affine so the fixed point is one scalar root."""
    return _bvp(LinearPathSolution(lc, path, "forward", quad_step), psi, tol)


def solve_linear_backward(lc: LinearCoefficients, psi: BoundaryMap, path: JumpPath,
                          tol: float = DEFAULT_TOL, quad_step: float = DEFAULT_QUAD) -> Trajectory:
    """Backward boundary problem via ``eta~_t = A(t) prod (1 - F2(S_i))^{-1}``."""
    if lc.F2.hi >= 1.0:
        raise PreconditionError("backward linear problem needs F2 < 1")
    return _bvp(LinearPathSolution(lc, path, "backward", quad_step), psi, tol)
