"""Pathwise boundary-value problems ``X_0 = psi(X_1)``.

For a fixed jump path the solution is ``X_t = phi_t(x0)`` where ``x0`` is a
root of ``g(x) = x - psi(phi_1(x))``.  Under the usual hypotheses ``g`` is
increasing with slope at least one, so a doubling bracket followed by a
bracketing root finder always succeeds; when the hypotheses fail the
search reports either no root or a flat zero set.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import CapabilityError, MultipleSolutions, NoFixedPoint, PreconditionError
from .fields import BoundaryMap, CoefficientField
from .flow import DEFAULT_STEP, det_flow, integrate_path, _jumps_in
from .paths import JumpPath
from .trajectory import Trajectory

__all__ = [
    "find_fixed_point",
    "solve_forward_bvp",
    "invert_jump_map",
    "solve_backward_bvp",
    "check_backward_existence",
    "check_backward_envelope",
    "deterministic_fixed_point",
    "check_hypotheses",
]

DEFAULT_TOL = 1e-10
BRACKET_CAP = 1e12
MULTI_WIDTH = 1e3


def find_fixed_point(g: Callable[[float], float], tol: float = DEFAULT_TOL,
                     cap: float = BRACKET_CAP, multi_width: float = MULTI_WIDTH) -> float:
    """Root of a nondecreasing ``g`` with ``g(-inf) < 0 < g(inf)``.

    The bracket starts at ``[-1, 1]`` and doubles outward up to ``cap``.
    A root is rejected as degenerate when ``|g| < tol`` also holds at both
    ends of a window of width ``multi_width * tol`` around it.
    """
    lo, hi = -1.0, 1.0
    glo, ghi = g(lo), g(hi)
    while glo > 0.0:
        hi, ghi = lo, glo
        lo *= 2.0
        if abs(lo) > cap:
            raise NoFixedPoint(f"g stays positive down to x={lo:.3g}")
        glo = g(lo)
    while ghi < 0.0:
        lo, glo = hi, ghi
        hi *= 2.0
        if hi > cap:
            raise NoFixedPoint(f"g stays negative up to x={hi:.3g}")
        ghi = g(hi)
    if glo == 0.0:
        root = lo
    elif ghi == 0.0:
        root = hi
    else:
        root = brentq(g, lo, hi, xtol=tol * 1e-3, rtol=4 * np.finfo(float).eps, maxiter=500)
    gr = g(root)
    if not abs(gr) < tol:
        # brentq stopped on width; finish with bisection on the residual
        a, b = lo, hi
        for _ in range(200):
            gr = g(root)
            if abs(gr) < tol or b - a <= 0:
                break
            if gr < 0:
                a = root
            else:
                b = root
            root = 0.5 * (a + b)
        if not abs(gr) < tol:
            raise NoFixedPoint(f"residual {gr:.3g} at the root exceeds tol={tol:.3g}")
    half = 0.5 * multi_width * tol
    if abs(g(root - half)) < tol and abs(g(root + half)) < tol:
        raise MultipleSolutions(
            f"|g| < {tol:.3g} on [{root - half:.6g}, {root + half:.6g}]: the boundary relation is degenerate")
    return root


def check_hypotheses(f: CoefficientField, F: CoefficientField, psi: BoundaryMap) -> list:
    """Declared-constant violations of the forward existence theorem."""
    problems = []
    if f.lipschitz is None:
        problems.append("drift: no Lipschitz constant declared")
    if F.slope_lo is not None and F.slope_lo < -1.0:
        problems.append(f"jump coefficient: lower slope {F.slope_lo} < -1")
    if not psi.monotone_nonincreasing:
        problems.append("boundary map is not non-increasing")
    return problems


def _solve(f: CoefficientField, jump, path: JumpPath, psi: BoundaryMap, tol: float,
           ode_step: float) -> Trajectory:
    jumps = _jumps_in(path, 0.0, 1.0)
    fe, pe = f.eval, psi.eval

    def g(x):
        return x - pe(integrate_path(fe, jump, jumps, 0.0, 1.0, x, ode_step).x_end)

    x0 = find_fixed_point(g, tol)
    traj = integrate_path(fe, jump, jumps, 0.0, 1.0, x0, ode_step)
    traj.path = path
    traj.meta["residual"] = abs(x0 - pe(traj.x_end))
    return traj


def solve_forward_bvp(f: CoefficientField, F: CoefficientField, psi: BoundaryMap, path: JumpPath,
                      tol: float = DEFAULT_TOL, ode_step: float = DEFAULT_STEP) -> Trajectory:
    """Solve ``X_t = X_0 + int f(r, X_r) dr + int F(r, X_r-) dN_r``, ``X_0 = psi(X_1)`` on one path."""
    Fe = F.eval
    return _solve(f, lambda r, y: y + Fe(r, y), path, psi, tol, ode_step)


def deterministic_fixed_point(f: CoefficientField, psi: BoundaryMap, tol: float = DEFAULT_TOL,
                              ode_step: float = DEFAULT_STEP) -> float:
    """``x*`` with ``x* = psi(Phi(0, 1; x*))``: the solution on the no-jump path."""
    pe = psi.eval
    return find_fixed_point(lambda x: x - pe(det_flow(f, 0.0, 1.0, x, ode_step)), tol)


# backward equations ----------------------------------------------------------


def invert_jump_map(F: CoefficientField, r: float, y: float, tol: float = 1e-14) -> float:
    """``A_r^{-1}(y)``: the unique ``z`` with ``z - F(r, z) = y``.

    The slope envelope bounds ``|z - y|`` by ``|F(r, y)| / |1 - slope|``,
    which gives the bracket.
    """
    if F.alpha is None and F.beta is None:
        raise CapabilityError("inverting the jump map needs a declared slope envelope")
    Fe = F.eval
    Fy = Fe(r, y)
    if Fy == 0.0:
        return float(y)
    if F.alpha is not None and F.alpha(r) < 1.0:
        gap = 1.0 - F.alpha(r)
    elif F.beta is not None and F.beta(r) > 1.0:
        gap = F.beta(r) - 1.0
    else:
        raise PreconditionError(f"jump map y - F({r}, y) is not strictly monotone by the envelope")
    d = abs(Fy) / gap
    d = d * (1.0 + 1e-9) + 1e-300
    A = lambda z: z - Fe(r, z) - y
    return brentq(A, y - d, y + d, xtol=tol * max(1.0, abs(y)), rtol=4 * np.finfo(float).eps)


def check_backward_envelope(F: CoefficientField, grid=None) -> list:
    """Points of ``[0, 1]`` where ``alpha - 1 <= beta <= alpha < 1`` fails."""
    if F.alpha is None or F.beta is None:
        raise CapabilityError("backward solver needs both slope envelopes alpha and beta")
    grid = np.linspace(0.0, 1.0, 201) if grid is None else np.asarray(grid, float)
    bad = []
    for t in grid:
        a, b = float(F.alpha(t)), float(F.beta(t))
        if not (a - 1.0 <= b <= a < 1.0):
            bad.append((float(t), a, b))
    return bad


def solve_backward_bvp(f: CoefficientField, F: CoefficientField, psi: BoundaryMap, path: JumpPath,
                       tol: float = DEFAULT_TOL, ode_step: float = DEFAULT_STEP) -> Trajectory:
    """Backward problem: the jump integrand sees the post-jump value ``X_r``.

    Solved as the forward problem with ``F~(r, x) = F(r, A_r^{-1}(x))``.
    Since ``x + F(r, A_r^{-1}(x)) = A_r^{-1}(x)``, the post-jump value is
    just the inverse of the jump map.
    """
    bad = check_backward_envelope(F)
    if bad:
        t, a, b = bad[0]
        raise PreconditionError(f"slope envelope fails alpha-1 <= beta <= alpha < 1 at t={t} "
                                f"(alpha={a}, beta={b})")
    traj = _solve(f, lambda r, y: invert_jump_map(F, r, y), path, psi, tol, ode_step)
    traj.backward = True
    Fe = F.eval
    traj.meta["backward_residual"] = max(
        (abs(xr - xl - Fe(r, xr)) for r, xl, xr in zip(traj.jump_times, traj.left, traj.right)),
        default=0.0)
    return traj


def check_backward_existence(F: CoefficientField, t_grid=None, x_grid=None) -> dict:
    """Grid scan for strict monotonicity of ``A_r(y) = y - F(r, y)``.

    Returns ``{"ok", "condition", "violation", "min_slope", "max_slope"}``.
    ``condition`` is ``"Con1"`` (``A_r`` increasing, slope of ``F`` below one)
    or ``"Con2"`` (decreasing, slope of ``F`` above one).  ``violation`` is
    an ``(r, x, y)`` triple where the difference quotient of ``A_r`` is not
    of the common strict sign.
    """
    t_grid = np.linspace(0.0, 1.0, 21) if t_grid is None else np.asarray(t_grid, float)
    x_grid = np.linspace(-10.0, 10.0, 81) if x_grid is None else np.asarray(x_grid, float)
    X, Y = np.meshgrid(x_grid, x_grid, indexing="ij")
    sel = X > Y
    X, Y = X[sel], Y[sel]
    qmin, qmax = math.inf, -math.inf
    arg_min = arg_max = None
    for r in t_grid:
        rr = np.full_like(X, r)
        q = 1.0 - (F.eval(rr, X) - F.eval(rr, Y)) / (X - Y)
        i, k = int(np.argmin(q)), int(np.argmax(q))
        if q[i] < qmin:
            qmin, arg_min = float(q[i]), (float(r), float(X[i]), float(Y[i]))
        if q[k] > qmax:
            qmax, arg_max = float(q[k]), (float(r), float(X[k]), float(Y[k]))
    eps = 1e-12
    if qmin > eps:
        cond, viol = "Con1", None
    elif qmax < -eps:
        cond, viol = "Con2", None
    else:
        cond = None
        viol = arg_min if abs(qmin) <= abs(qmax) else arg_max
    for env, name in ((F.alpha, "alpha"), (F.beta, "beta")):
        if env is None or cond is None:
            continue
        # declared envelopes must be consistent with the scan
        for r in t_grid:
            rr = np.full_like(X, r)
            slope = (F.eval(rr, X) - F.eval(rr, Y)) / (X - Y)
            e = float(env(r))
            off = slope > e + 1e-12 if name == "alpha" else slope < e - 1e-12
            if np.any(off):
                i = int(np.argmax(off))
                viol = (float(r), float(X[i]), float(Y[i]))
                cond = None
                break
    return {
        "ok": cond is not None,
        "condition": cond,
        "violation": viol,
        "min_slope": 1.0 - qmax,
        "max_slope": 1.0 - qmin,
    }
