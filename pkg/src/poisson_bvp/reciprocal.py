"""Conditional-independence harness for the reciprocal property.

For times ``a < u < b`` and ``v`` outside ``[a, b]`` the reciprocal property
says ``X_u`` and ``X_v`` are independent given ``(X_a, X_b)``.  Samples are
grouped into cells of ``(X_a, X_b)``; inside each cell a permutation test
on the squared distance covariance of ``(X_u, X_v)`` gives a p-value, and
Benjamini-Hochberg pools the cells.

Cells use exact values when a coordinate takes few distinct values (the
linear cases below all have count-driven, discrete laws) and quantile bins
otherwise.  Quantile binning only approximates conditioning, so a
continuous coordinate can show dependence that lives inside a bin.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np
from scipy.stats import false_discovery_control

from .boundary import deterministic_fixed_point
from .errors import PreconditionError
from .fields import BoundaryMap
from .linear import LinearCoefficients, solve_linear_bvp
from .montecarlo import OK, sample_paths, solve_bvp_batch
from .paths import Rng

__all__ = [
    "CIReport",
    "dcov2",
    "ci_permutation_test",
    "discretize",
    "reciprocal_samples",
    "reciprocal_case",
    "representation_check_case3",
    "representation_check_case4",
    "markov_chain_check_case5",
    "CASE_PRESETS",
    "DEFAULT_TIMES",
]

DEFAULT_TIMES = (0.3, 0.5, 0.7, 0.9)
CASE_PRESETS = {1: "case1", 2: "case2", 3: "case3", 4: "case4", 5: "case5"}
MAX_LEVELS = 64
N_PERM = 1000
MIN_COUNT = 50
MIN_SAMPLES = 10_000


# distance covariance -----------------------------------------------------------


@numba.njit(cache=True)
def _row_sums(x):
    # sum_j |x_i - x_j| for every i, by sorting
    n = x.size
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    csum = np.cumsum(xs)
    total = csum[-1]
    out = np.empty(n)
    for k in range(n):
        left = xs[k] * k - (csum[k - 1] if k > 0 else 0.0)
        right = (total - csum[k]) - xs[k] * (n - 1 - k)
        out[order[k]] = left + right
    return out


@numba.njit(cache=True)
def _cross(xs, yr, ys, m):
    # sum_{i != j} |x_i - x_j| |y_i - y_j| with x sorted; yr = dense y ranks (1-based).
    # One Fenwick tree over y ranks holds (count, sum x, sum y, sum xy).
    n = xs.size
    tree = np.zeros((m + 1, 4))
    tc = 0.0
    tx = 0.0
    ty = 0.0
    txy = 0.0
    acc = 0.0
    for i in range(n):
        xi, yi, r = xs[i], ys[i], yr[i]
        pc = 0.0
        px = 0.0
        py = 0.0
        pxy = 0.0
        k = r
        while k > 0:
            pc += tree[k, 0]
            px += tree[k, 1]
            py += tree[k, 2]
            pxy += tree[k, 3]
            k -= k & (-k)
        qc, qx, qy, qxy = tc - pc, tx - px, ty - py, txy - pxy
        below = xi * yi * pc - xi * py - yi * px + pxy
        above = xi * yi * qc - xi * qy - yi * qx + qxy
        acc += below - above
        xy = xi * yi
        k = r
        while k <= m:
            tree[k, 0] += 1.0
            tree[k, 1] += xi
            tree[k, 2] += yi
            tree[k, 3] += xy
            k += k & (-k)
        tc += 1.0
        tx += xi
        ty += yi
        txy += xy
    return 2.0 * acc


@numba.njit(cache=True)
def _dcov2_core(xs, ax, ys, yr, by, m, sa, sb):
    n = xs.size
    s1 = _cross(xs, yr, ys, m) / (n * n)
    s2 = (sa / (n * n)) * (sb / (n * n))
    s3 = 0.0
    for i in range(n):
        s3 += ax[i] * by[i]
    s3 /= n * n * n
    return s1 + s2 - 2.0 * s3


def dcov2(x, y) -> float:
    """Squared sample distance covariance (V-statistic), ``O(n log n)``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    o = np.argsort(x, kind="mergesort")
    xs, ys = x[o], y[o]
    uy, yr = np.unique(ys, return_inverse=True)
    ax, by = _row_sums(xs), _row_sums(ys)
    return float(_dcov2_core(xs, ax, ys, (yr + 1).astype(np.int64), by, len(uy), ax.sum(), by.sum()))


@numba.njit(cache=True)
def _perm_loop(xs, ax, ys, yr, by, m, sa, sb, perms, obs):
    ge = 0
    n = xs.size
    # permuted statistics equal to the observed one up to rounding count as ties
    thr = obs - 1e-9 * (sa / (n * n)) * (sb / (n * n))
    for b in range(perms.shape[0]):
        p = perms[b]
        st = _dcov2_core(xs, ax, ys[p], yr[p], by[p], m, sa, sb)
        if st >= thr:
            ge += 1
    return ge


def _levels(v, rel_gap: float = 1e-8):
    """Sort order, group id per sorted entry and group starts.

    Consecutive sorted values further apart than ``rel_gap`` (relative)
    start a new group.
    """
    o = np.argsort(v, kind="mergesort")
    vs = v[o]
    scale = np.maximum(np.abs(vs[1:]), np.abs(vs[:-1]))
    brk = np.diff(vs) > rel_gap * np.maximum(scale, 1.0)
    grp = np.concatenate([[0], np.cumsum(brk)])
    first = np.concatenate([[0], np.flatnonzero(brk) + 1])
    return o, vs, grp, first


def _snap(v):
    """Collapse values that agree to solver precision onto one representative."""
    o, vs, grp, first = _levels(v)
    out = np.empty_like(v)
    out[o] = vs[first][grp]
    return out


def _perm_test(x, y, n_perm, gen):
    x = _snap(np.asarray(x, float))
    y = _snap(np.asarray(y, float))
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return 0.0, 1.0
    o = np.argsort(x, kind="mergesort")
    xs, ys = x[o], y[o]
    uy, yr = np.unique(ys, return_inverse=True)
    yr = (yr + 1).astype(np.int64)
    ax, by = _row_sums(xs), _row_sums(ys)
    sa, sb = ax.sum(), by.sum()
    obs = float(_dcov2_core(xs, ax, ys, yr, by, len(uy), sa, sb))
    perms = gen.permuted(np.tile(np.arange(len(x), dtype=np.int64), (n_perm, 1)), axis=1)
    ge = _perm_loop(xs, ax, ys, yr, by, len(uy), sa, sb, perms, obs)
    return obs, (1.0 + ge) / (1.0 + n_perm)


# cells ---------------------------------------------------------------------------


def discretize(values, bins: int = 4, max_levels: int = MAX_LEVELS, rel_gap: float = 1e-8):
    """Cell labels for one coordinate and whether they are exact levels.

    Sorted values are split wherever consecutive entries differ by more than
    ``rel_gap`` (relative).  With at most ``max_levels`` groups each group is a
    level; otherwise quantile bins are used.
    """
    v = np.asarray(values, float)
    o, _, grp, first = _levels(v, rel_gap)
    if len(first) <= max_levels:
        lab = np.empty(len(v), np.int64)
        lab[o] = grp
        return lab, True
    edges = np.quantile(v, np.linspace(0.0, 1.0, bins + 1)[1:-1])
    return np.searchsorted(edges, v, side="right").astype(np.int64), False


@dataclass
class CIReport:
    times: tuple
    alpha: float
    n_samples: int
    cells: list
    skipped: list
    exact_cells: tuple
    rejected: bool
    min_count: int = MIN_COUNT
    n_perm: int = N_PERM
    meta: dict = field(default_factory=dict)

    @property
    def bins(self) -> int:
        return len(self.cells)

    @property
    def p_values(self) -> list:
        return [c["p"] for c in self.cells]

    def to_dict(self) -> dict:
        return {
            "times": {"a": self.times[0], "u": self.times[1], "b": self.times[2], "v": self.times[3]},
            "alpha": self.alpha,
            "n_samples": self.n_samples,
            "cells": self.cells,
            "skipped_cells": self.skipped,
            "exact_cells": {"X_a": self.exact_cells[0], "X_b": self.exact_cells[1]},
            "verdict": "reject" if self.rejected else "pass",
            "min_count": self.min_count,
            "n_perm": self.n_perm,
            **self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def ci_permutation_test(samples, bins: int = 4, alpha: float = 0.01, seed: int = 0,
                        times: Sequence[float] = DEFAULT_TIMES, n_perm: int = N_PERM,
                        min_count: int = MIN_COUNT, min_samples: int = MIN_SAMPLES) -> CIReport:
    """Test ``X_u`` independent of ``X_v`` given ``(X_a, X_b)``.

    ``samples`` is an ``(n, 4)`` array with columns ``X_a, X_u, X_b, X_v``.
    Cell ``k`` (in sorted label order) draws its permutations from
    ``Rng(seed, k)``.
    """
    a, u, b, v = times
    if not (a < u < b and (v < a or v > b)):
        raise ValueError("need a < u < b and v outside [a, b]")
    S = np.asarray(samples, float)
    if S.ndim != 2 or S.shape[1] != 4:
        raise ValueError("samples must have shape (n, 4)")
    if len(S) < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {len(S)}")
    if not np.all(np.isfinite(S)):
        raise ValueError("samples contain non-finite values")
    la, ea = discretize(S[:, 0], bins)
    lb, eb = discretize(S[:, 2], bins)
    keys, inv = np.unique(np.stack([la, lb], axis=1), axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    cells, skipped = [], []
    for k, key in enumerate(keys):
        idx = np.flatnonzero(inv == k)
        cell = {"cell": [int(key[0]), int(key[1])], "n": int(len(idx)),
                "X_a": float(np.median(S[idx, 0])), "X_b": float(np.median(S[idx, 2]))}
        if len(idx) < min_count:
            skipped.append(cell)
            continue
        gen = Rng(seed, k).generator()
        stat, p = _perm_test(S[idx, 1], S[idx, 3], n_perm, gen)
        cells.append({**cell, "dcov2": stat, "p": p})
    if cells:
        adj = false_discovery_control([c["p"] for c in cells], method="bh")
        for c, q in zip(cells, adj):
            c["p_bh"] = float(q)
        rejected = bool(np.any(adj < alpha))
    else:
        rejected = False
    return CIReport(tuple(times), alpha, len(S), cells, skipped, (bool(ea), bool(eb)), rejected,
                    min_count, n_perm)


# samples from the boundary problem ----------------------------------------------


def reciprocal_samples(problem, n_paths: int, seed: int, times: Sequence[float] = DEFAULT_TIMES,
                       workers: int = 1) -> np.ndarray:
    """``(n, 4)`` array of ``(X_a, X_u, X_b, X_v)`` on independent paths."""
    paths = sample_paths(seed, n_paths)
    res = solve_bvp_batch(problem.drift.eval, problem.batch_jump(), problem.psi.eval, paths,
                          queries=tuple(times), x_start=problem.xstar(), tol=problem.tol,
                          ode_step=problem.ode_step, workers=workers)
    if not np.all(res.status == OK):
        raise PreconditionError("some paths failed to solve; the problem violates the hypotheses")
    return res.values


def reciprocal_case(problem, n_paths: int = 10_000, seed: int = 0, alpha: float = 0.01,
                    times: Sequence[float] = DEFAULT_TIMES, workers: int = 1, **kw) -> CIReport:
    rep = ci_permutation_test(reciprocal_samples(problem, n_paths, seed, times, workers), alpha=alpha,
                              seed=seed, times=times, **kw)
    rep.meta["problem"] = problem.name
    return rep


# exact structural checks ------------------------------------------------------------


def _grid(n=21):
    return np.linspace(0.0, 1.0, n)


def representation_check_case3(lc: LinearCoefficients, psi: BoundaryMap, n_paths: int = 1000,
                               seed: int = 0, tol: float = 1e-8) -> dict:
    """``Y_t - xi_t`` is constant in ``t`` with ``Y = X / A`` and
    ``xi_t = int_0^t f1/A + sum_{s_i <= t} F1(s_i)/A(s_i)``.
    Holds when ``F2 = 0``; any other ``F2`` shows up as a failure."""
    from .linear import LinearFactors

    fac = LinearFactors(lc)
    F1 = lc.F1.fn
    grid = _grid()
    worst, worst_path = 0.0, None
    for i, path in enumerate(sample_paths(seed, n_paths)):
        traj = solve_linear_bvp(lc, psi, path)
        devs = []
        for t in grid:
            xi = fac.f1_over_A(0.0, t) + sum(F1(s) / float(fac.A(s)) for s in path.times if s <= t)
            devs.append(traj(t) / float(fac.A(t)) - xi)
        d = float(np.ptp(devs))
        if d > worst:
            worst, worst_path = d, i
    return {"ok": worst < tol, "max_dev": worst, "worst_path": worst_path, "n_paths": n_paths}


def representation_check_case4(lc: LinearCoefficients, psi: BoundaryMap, n_paths: int = 1000,
                               seed: int = 0, tol: float = 1e-8) -> dict:
    """``log|X_t| - xi_t`` is constant with ``xi_t = int_0^t f2 + sum log(1 + F2(s_i))``,
    and ``X`` never changes sign."""
    if psi.eval(0.0) == 0.0:
        raise PreconditionError("psi(0) = 0: the solution is the zero process (cases 1 and 2)")
    if lc.F2.lo <= -1.0:
        raise PreconditionError("case 4 needs F2 > -1")
    F2 = lc.F2.fn
    grid = _grid()
    worst, worst_path, sign_changes = 0.0, None, 0
    for i, path in enumerate(sample_paths(seed, n_paths)):
        traj = solve_linear_bvp(lc, psi, path)
        xs = np.array([traj(t) for t in grid])
        if np.any(xs == 0.0) or not (np.all(xs > 0) or np.all(xs < 0)):
            sign_changes += 1
            worst, worst_path = math.inf, i
            continue
        xi = np.array([lc.f2.integral(0.0, t) + sum(math.log1p(F2(s)) for s in path.times if s <= t)
                       for t in grid])
        d = float(np.ptp(np.log(np.abs(xs)) - xi))
        if d > worst:
            worst, worst_path = d, i
    return {"ok": worst < tol and sign_changes == 0, "max_dev": worst, "worst_path": worst_path,
            "sign_changes": sign_changes, "n_paths": n_paths}


def markov_chain_check_case5(lc: LinearCoefficients, psi: BoundaryMap, n_paths: int = 100_000,
                             seed: int = 0, tol: float = 1e-8, workers: int = 1,
                             grid: Optional[Sequence[float]] = None) -> dict:
    """``Y_t = X_t / A(t)`` is ``x*`` on jump-free paths and otherwise
    ``psi(0)`` before the first jump and ``0`` from it on."""
    f, F = lc.fields()
    if not (lc.F2.is_constant and lc.F2.lo == -1.0):
        raise PreconditionError("case 5 needs F2 = -1")
    grid = tuple(_grid(11) if grid is None else grid)
    xstar = deterministic_fixed_point(f, psi)
    psi0 = float(psi.eval(0.0))
    paths = sample_paths(seed, n_paths)
    Fe = F.eval
    res = solve_bvp_batch(f.eval, lambda r, y: y + Fe(r, y), psi.eval, paths, queries=grid,
                          x_start=xstar, workers=workers)
    A = np.array([math.exp(lc.f2.integral(0.0, t)) for t in grid])
    Y = res.values / A
    s1 = np.array([p.times[0] if len(p) else math.inf for p in paths])
    g = np.asarray(grid)[None, :]
    empty = ~np.isfinite(s1)
    expected = np.where(empty[:, None], xstar, np.where(g < s1[:, None], psi0, 0.0))
    dev = np.abs(Y - expected)
    dev[res.status != OK] = math.inf
    support = {round(x, 12) for x in (xstar, psi0, 0.0)}
    outside = int(np.sum(np.min(np.abs(Y[..., None] - np.array(sorted(support))), axis=-1) > tol))
    return {"ok": bool(np.all(dev < tol)), "max_dev": float(dev.max()), "outside_support": outside,
            "n_paths": n_paths, "xstar": xstar, "psi0": psi0, "n_empty": int(empty.sum())}
