"""Derivatives of the boundary-value solution with respect to the jump times.

Both weights are read off a solved trajectory: one-sided values at jumps
come from the stored left/right limits, and the exponent integrals reuse
the RK4 nodes.
"""

from __future__ import annotations

import csv
import io
import math
from typing import Optional

from .errors import PreconditionError
from .fields import BoundaryMap, CoefficientField
from .flow import DEFAULT_STEP, jump_bracket
from .paths import JumpPath
from .trajectory import Trajectory

__all__ = ["weight_A", "weight_B", "dX0_dsj", "dXt_dsj", "fd_oracle", "rel_err",
           "sensitivity_rows", "rows_to_csv", "FD_STEP", "REL_FLOOR"]

FD_STEP = 1e-6
FD_TOL = 1e-13
REL_FLOOR = 1e-6


def _forward_only(traj: Trajectory):
    if traj.backward:
        raise PreconditionError("jump-time weights are defined for forward trajectories")


def _h(traj: Trajectory) -> float:
    return traj.meta.get("ode_step", DEFAULT_STEP)


def weight_B(traj: Trajectory, t: float, f: CoefficientField, F: CoefficientField) -> float:
    """``exp(int_0^t d2f(r, X_r) dr) prod_{s_i <= t} (1 + d2F(s_i, X_{s_i-}))``."""
    f.require("d2")
    F.require("d2")
    _forward_only(traj)
    expo = traj.integrate(f.d2, traj.start, t, _h(traj))
    prod = 1.0
    for r, yl in zip(traj.jump_times, traj.left):
        if r > t:
            break
        prod *= 1.0 + F.d2(r, yl)
    return math.exp(expo) * prod


def weight_A(traj: Trajectory, s_j: float, t: float, f: CoefficientField, F: CoefficientField) -> float:
    """Direct effect on ``X_t`` of moving the jump at ``s_j <= t`` with ``X_0`` held fixed."""
    f.require("d2")
    F.require("d1", "d2")
    _forward_only(traj)
    i = traj.jump_index(s_j)
    if s_j > t:
        raise ValueError(f"weight_A needs s_j <= t (s_j={s_j}, t={t})")
    expo = traj.integrate(f.d2, s_j, t, _h(traj))
    prod = 1.0
    for r, yl in zip(traj.jump_times[i + 1:], traj.left[i + 1:]):
        if r > t:
            break
        prod *= 1.0 + F.d2(r, yl)
    return math.exp(expo) * prod * jump_bracket(f, F, s_j, traj.left[i], traj.right[i])


def _sj(traj: Trajectory, j: int) -> float:
    if not 1 <= j <= len(traj.jump_times):
        raise ValueError(f"jump index {j} out of range 1..{len(traj.jump_times)}")
    return traj.jump_times[j - 1]


def dX0_dsj(traj: Trajectory, j: int, f: CoefficientField, F: CoefficientField,
            psi: BoundaryMap) -> float:
    """``psi'(X_1) A(s_j, 1) / (1 - psi'(X_1) B(1))``."""
    sj = _sj(traj, j)
    dp = psi.derivative(traj.x1)
    if dp == 0.0:
        return 0.0
    A = weight_A(traj, sj, traj.end, f, F)
    B = weight_B(traj, traj.end, f, F)
    return dp * A / (1.0 - dp * B)


def dXt_dsj(traj: Trajectory, j: int, t: float, f: CoefficientField, F: CoefficientField,
            psi: BoundaryMap) -> float:
    """``B(t) dX_0/ds_j`` plus ``A(s_j, t)`` when ``s_j <= t``."""
    sj = _sj(traj, j)
    d0 = dX0_dsj(traj, j, f, F, psi)
    out = weight_B(traj, t, f, F) * d0 if d0 != 0.0 else 0.0
    if sj <= t:
        out += weight_A(traj, sj, t, f, F)
    return out


def fd_oracle(problem, path: JumpPath, j: int, t: float, h: Optional[float] = None) -> float:
    """Central difference of the re-solved ``X_t`` in ``s_j``.

    The default step is ``min(1e-6, gap / 4)`` where ``gap`` is the distance
    from ``s_j`` to its neighbours, to ``0``, ``1`` and ``t``.  An explicit
    ``h`` that would cross any of them is an error.
    """
    if not 1 <= j <= len(path):
        raise ValueError(f"jump index {j} out of range 1..{len(path)}")
    s = path.times
    sj = s[j - 1]
    lo = s[j - 2] if j > 1 else 0.0
    hi = s[j] if j < len(s) else 1.0
    marks = [lo, hi] + ([t] if lo < t < hi else [])
    gap = min(abs(sj - m) for m in marks)
    if gap <= 0.0:
        raise ValueError(f"jump s_{j}={sj} sits on t={t}; X_t is not differentiable there")
    if h is None:
        h = min(FD_STEP, gap / 4.0)
    elif not 0.0 < h < gap:
        raise ValueError(f"step h={h} would move s_{j} across a neighbour, 0, 1 or t (gap {gap:.3g})")

    def shifted(d):
        p = JumpPath(s[: j - 1] + (sj + d,) + s[j:], path.horizon)
        return problem.solve(p, tol=FD_TOL)(t)

    return (shifted(h) - shifted(-h)) / (2.0 * h)


def rel_err(a: float, b: float, floor: float = REL_FLOOR) -> float:
    """``|a - b| / max(|a|, |b|, floor)``."""
    return abs(a - b) / max(abs(a), abs(b), floor)


def sensitivity_rows(problem, paths, ts=(0.0, 0.5, 1.0), tol: float = FD_TOL) -> list:
    """Analytic vs finite-difference ``dX_t/ds_j`` for every path, jump and time."""
    rows = []
    for pid, path in enumerate(paths):
        if not len(path):
            continue
        traj = problem.solve(path, tol=tol)
        for j in range(1, len(path) + 1):
            for t in ts:
                if path.times[j - 1] == t:
                    continue
                a = dXt_dsj(traj, j, t, problem.f, problem.F, problem.psi)
                d = fd_oracle(problem, path, j, t)
                rows.append({"path_id": pid, "j": j, "t": t, "analytic": a, "fd": d,
                             "rel_err": rel_err(a, d)})
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    cols = ["path_id", "j", "t", "analytic", "fd", "rel_err"]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([r["path_id"], r["j"], repr(float(r["t"])), repr(float(r["analytic"])),
                    repr(float(r["fd"])), repr(float(r["rel_err"]))])
    return buf.getvalue()
