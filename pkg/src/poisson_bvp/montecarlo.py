"""Vectorised Monte Carlo over many jump paths.

All paths of a block advance together through numpy arrays.  Each path
integrates its own jump-free segments with the same uniform-step rule as
the scalar integrator, so a path gives the same RK4 grid in both.  Within a
segment round, paths are sorted by step count so the active set is always
a prefix of the arrays.

Path ``i`` is always drawn from ``Rng(seed, i)`` and blocks are fixed
slices of path indices; results are therefore identical for any number of
worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .paths import Rng, paths_to_matrix, sample_path

__all__ = ["OK", "NO_FIXED_POINT", "MULTIPLE", "OVERFLOW", "STATUS_NAMES",
           "BatchResult", "sample_paths", "flow_batch", "solve_bvp_batch", "BatchFlow"]

OK, NO_FIXED_POINT, MULTIPLE, OVERFLOW = 0, 1, 2, 3
STATUS_NAMES = {OK: "ok", NO_FIXED_POINT: "no_fixed_point", MULTIPLE: "multiple", OVERFLOW: "overflow"}
BLOCK = 16384


def sample_paths(seed: int, n_paths: int, start: int = 0, horizon: float = 1.0) -> list:
    return [sample_path(Rng(seed, i), horizon) for i in range(start, start + n_paths)]


def _steps(length: np.ndarray, h: float) -> np.ndarray:
    n = np.ceil(length / h)
    n = n + (n % 2)
    n[length <= 0.0] = 0
    return n.astype(np.int64)


class BatchFlow:
    """Integrates ``y' = f(t, y)`` with jumps ``y -> jump(t, y)`` for a block of paths."""

    def __init__(self, drift: Callable, jump: Callable, jumps: np.ndarray, h: float):
        self.drift = drift
        self.jump = jump
        self.jumps = jumps
        self.h = h

    def _advance(self, y, cur, target):
        L = target - cur
        n = _steps(L, self.h)
        nmax = int(n.max(initial=0))
        if nmax == 0:
            return y
        order = np.argsort(-n, kind="stable")
        ns = n[order]
        # active[k] = number of paths still stepping at step k
        active = len(ns) - np.searchsorted(ns[::-1], np.arange(nmax), side="right")
        ys = y[order].copy()
        a = cur[order]
        dt = np.where(ns > 0, L[order] / np.maximum(ns, 1), 0.0)
        half = 0.5 * dt
        sixth = dt / 6.0
        f = self.drift
        for k in range(nmax):
            m = active[k]
            yk = ys[:m]
            dk, hk = dt[:m], half[:m]
            t = a[:m] + k * dk
            th = t + hk
            k1 = f(t, yk)
            k2 = f(th, yk + hk * k1)
            k3 = f(th, yk + hk * k2)
            k4 = f(t + dk, yk + dk * k3)
            ys[:m] = yk + sixth[:m] * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out = np.empty_like(y)
        out[order] = ys
        return out

    def run(self, x0: np.ndarray, idx: np.ndarray, queries: Sequence[float] = ()):
        """Flow from ``(0, x0)`` to ``t = 1`` for paths ``idx``.

        Returns ``(x1, q)`` where ``q[:, k]`` holds ``X`` at ``queries[k]``
        (post-jump values, so a jump exactly at a query time is included).
        """
        J = self.jumps[idx]
        B = len(idx)
        Q = len(queries)
        qt = np.broadcast_to(np.asarray(queries, float), (B, Q))
        times = np.concatenate([J, qt], axis=1)
        kinds = np.concatenate([np.zeros(J.shape, np.int8), np.ones((B, Q), np.int8)], axis=1)
        slot = np.concatenate([np.full(J.shape, -1), np.broadcast_to(np.arange(Q), (B, Q))], axis=1)
        order = np.lexsort((kinds, times), axis=-1)
        rows = np.arange(B)[:, None]
        times, kinds, slot = times[rows, order], kinds[rows, order], slot[rows, order]
        y = np.asarray(x0, float).copy()
        cur = np.zeros(B)
        out_q = np.full((B, Q), np.nan)
        for r in range(times.shape[1]):
            tr = times[:, r]
            live = np.isfinite(tr)
            if not live.any():
                break
            target = np.where(live, tr, cur)
            y = self._advance(y, cur, target)
            cur = target
            jmask = live & (kinds[:, r] == 0)
            if jmask.any():
                y[jmask] = self.jump(tr[jmask], y[jmask])
            qmask = live & (kinds[:, r] == 1)
            if qmask.any():
                out_q[qmask, slot[qmask, r]] = y[qmask]
        y = self._advance(y, cur, np.ones(B))
        return y, out_q


@dataclass
class BatchResult:
    paths: list
    x0: np.ndarray
    x1: np.ndarray
    values: np.ndarray
    queries: tuple
    status: np.ndarray

    @property
    def n1(self) -> np.ndarray:
        return np.array([len(p) for p in self.paths])

    def counts_at(self, t: float) -> np.ndarray:
        return np.array([p.count(0.0, t) for p in self.paths])

    @property
    def ok(self) -> np.ndarray:
        return self.status == OK


def _blocks(n: int, block: int):
    return [(i, min(i + block, n)) for i in range(0, n, block)]


def _map_blocks(fn, n, block, workers):
    spans = _blocks(n, block)
    if workers and workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(fn, spans))
    else:
        parts = [fn(s) for s in spans]
    return parts


def flow_batch(drift: Callable, jump: Callable, paths: list, x, queries: Sequence[float] = (),
               ode_step: float = 1e-3, workers: int = 1, block: int = BLOCK) -> BatchResult:
    """Initial-value flows ``phi_t(x)`` for every path."""
    J = paths_to_matrix(paths)
    bf = BatchFlow(drift, jump, J, ode_step)
    x0 = np.broadcast_to(np.asarray(x, float), (len(paths),)).copy()

    def work(span):
        a, b = span
        idx = np.arange(a, b)
        with np.errstate(all="ignore"):
            return bf.run(x0[a:b], idx, queries)

    parts = _map_blocks(work, len(paths), block, workers)
    x1 = np.concatenate([p[0] for p in parts]) if parts else np.empty(0)
    q = np.concatenate([p[1] for p in parts]) if parts else np.empty((0, len(queries)))
    status = np.where(np.isfinite(x1), OK, OVERFLOW).astype(np.int8)
    return BatchResult(paths, x0, x1, q, tuple(queries), status)


def _solve_block(bf: BatchFlow, psi: Callable, idx: np.ndarray, x_start: float, tol: float,
                 cap: float, multi_width: float, max_iter: int = 200):
    B = len(idx)

    def g(x, sub):
        x1, _ = bf.run(x, idx[sub])
        return x - psi(x1)

    status = np.full(B, OK, np.int8)
    xa = np.full(B, float(x_start))
    ga = g(xa, np.arange(B))
    xb = xa - ga
    same = xb == xa
    xb[same] = xa[same] + 1.0
    gb = g(xb, np.arange(B))
    # orient so that lo has g <= 0 and hi has g >= 0 where bracketed
    lo = np.where(ga <= gb, xa, xb)
    glo = np.where(ga <= gb, ga, gb)
    hi = np.where(ga <= gb, xb, xa)
    ghi = np.where(ga <= gb, gb, ga)
    bad = ~(np.isfinite(glo) & np.isfinite(ghi))
    status[bad] = OVERFLOW
    # expand outward until a sign change
    need = (status == OK) & ((glo > 0) | (ghi < 0))
    width = np.maximum(np.abs(hi - lo), 1.0)
    while need.any():
        sub = np.flatnonzero(need)
        down = glo[sub] > 0
        width[sub] *= 2.0
        xn = np.where(down, lo[sub] - width[sub], hi[sub] + width[sub])
        gn = g(xn, sub)
        d, u = sub[down], sub[~down]
        hi[d], ghi[d] = lo[d], glo[d]
        lo[d], glo[d] = xn[down], gn[down]
        lo[u], glo[u] = hi[u], ghi[u]
        hi[u], ghi[u] = xn[~down], gn[~down]
        status[sub[~np.isfinite(gn)]] = OVERFLOW
        out = (np.abs(xn) > cap) & ((np.where(down, gn > 0, gn < 0)))
        status[sub[out]] = NO_FIXED_POINT
        need = (status == OK) & ((glo > 0) | (ghi < 0))
    # Illinois regula falsi on the brackets
    root = np.where(np.abs(glo) <= np.abs(ghi), lo, hi)
    groot = np.where(np.abs(glo) <= np.abs(ghi), glo, ghi)
    side = np.zeros(B, np.int8)
    stop = 1e-2 * tol
    for _ in range(max_iter):
        act = (status == OK) & (np.abs(groot) > stop) & (np.abs(hi - lo) > 1e-3 * tol)
        if not act.any():
            break
        sub = np.flatnonzero(act)
        l, h, gl, gh = lo[sub], hi[sub], glo[sub], ghi[sub]
        denom = gh - gl
        xn = np.where(denom != 0, h - gh * (h - l) / np.where(denom != 0, denom, 1.0), 0.5 * (l + h))
        inside = (xn - l) * (xn - h) < 0
        xn = np.where(inside, xn, 0.5 * (l + h))
        gn = g(xn, sub)
        root[sub], groot[sub] = xn, gn
        left = gn < 0
        # Illinois: halve the stale endpoint's value when a side repeats
        rep_l = left & (side[sub] == -1)
        rep_r = ~left & (side[sub] == 1)
        lo[sub] = np.where(left, xn, l)
        glo[sub] = np.where(left, gn, np.where(rep_r, 0.5 * gl, gl))
        hi[sub] = np.where(left, h, xn)
        ghi[sub] = np.where(left, np.where(rep_l, 0.5 * gh, gh), gn)
        side[sub] = np.where(left, -1, 1)
        status[sub[~np.isfinite(gn)]] = OVERFLOW
    okm = status == OK
    status[okm & ~(np.abs(groot) < tol)] = NO_FIXED_POINT
    okm = np.flatnonzero(status == OK)
    if okm.size:
        half = 0.5 * multi_width * tol
        gm = g(root[okm] - half, okm)
        gp = g(root[okm] + half, okm)
        flat = (np.abs(gm) < tol) & (np.abs(gp) < tol)
        status[okm[flat]] = MULTIPLE
    return root, status


def solve_bvp_batch(drift: Callable, jump: Callable, psi: Callable, paths: list,
                    queries: Sequence[float] = (), x_start: float = 0.0, tol: float = 1e-10,
                    ode_step: float = 1e-3, workers: int = 1, block: int = BLOCK,
                    cap: float = 1e12, multi_width: float = 1e3) -> BatchResult:
    """Solve ``x = psi(phi_1(x))`` path by path, then evaluate ``X`` at ``queries``.

    ``x_start`` should be the deterministic fixed point: the root on every
    jump-free path, and a good first guess elsewhere.
    """
    J = paths_to_matrix(paths)
    bf = BatchFlow(drift, jump, J, ode_step)

    def work(span):
        a, b = span
        idx = np.arange(a, b)
        with np.errstate(all="ignore"):
            root, status = _solve_block(bf, psi, idx, x_start, tol, cap, multi_width)
            x0 = np.where(status == OK, root, np.nan)
            x1, q = bf.run(np.where(status == OK, root, 0.0), idx, queries)
        x1 = np.where(status == OK, x1, np.nan)
        q[status != OK] = np.nan
        return x0, x1, q, status

    parts = _map_blocks(work, len(paths), block, workers)
    cat = lambda k, empty: np.concatenate([p[k] for p in parts]) if parts else empty
    return BatchResult(paths, cat(0, np.empty(0)), cat(1, np.empty(0)),
                       cat(2, np.empty((0, len(queries)))), tuple(queries),
                       cat(3, np.empty(0, np.int8)))
