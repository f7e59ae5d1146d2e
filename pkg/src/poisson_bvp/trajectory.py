"""Piecewise-smooth cadlag trajectories and their JSON form."""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NumericalOverflow
from .paths import JumpPath

__all__ = ["Segment", "Trajectory", "n_steps", "rk4_nodes", "rk4_step", "simpson"]


def n_steps(length: float, h: float) -> int:
    """Number of uniform RK4 steps on an interval: ``ceil(length/h)`` rounded up to even.

    Even counts let Simpson's rule reuse the RK4 nodes.
    """
    if length <= 0.0:
        return 0
    n = math.ceil(length / h)
    return n + (n & 1)


def rk4_step(f, t, y, dt):
    half = 0.5 * dt
    k1 = f(t, y)
    k2 = f(t + half, y + half * k1)
    k3 = f(t + half, y + half * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_nodes(f, a: float, b: float, y: float, h: float):
    """Fixed-step RK4 for ``y' = f(t, y)`` from ``(a, y)`` to ``b``; returns node lists."""
    n = n_steps(b - a, h)
    ts, ys = [a], [y]
    if n == 0:
        return ts, ys
    dt = (b - a) / n
    half = 0.5 * dt
    sixth = dt / 6.0
    for k in range(n):
        t = a + k * dt
        k1 = f(t, y)
        k2 = f(t + half, y + half * k1)
        k3 = f(t + half, y + half * k2)
        k4 = f(t + dt, y + dt * k3)
        y = y + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ts.append(a + (k + 1) * dt)
        ys.append(y)
    ts[-1] = b
    if not math.isfinite(y):
        raise NumericalOverflow(f"non-finite state while integrating on [{a}, {b}]")
    return ts, ys


def simpson(values, dt: float) -> float:
    """Composite Simpson on an even number of uniform intervals."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return 0.0
    if (v.size - 1) % 2:
        raise ValueError("Simpson needs an even number of intervals")
    return float(dt / 3.0 * (v[0] + v[-1] + 4.0 * v[1:-1:2].sum() + 2.0 * v[2:-1:2].sum()))


@dataclass
class Segment:
    """ODE output on one jump-free interval ``[start, end]``."""

    start: float
    end: float
    times: list
    values: list

    @property
    def dt(self) -> float:
        n = len(self.times) - 1
        return (self.end - self.start) / n if n else 0.0


@dataclass
class Trajectory:
    """A cadlag path ``X`` on ``[start, end]`` with jumps at ``path`` times in ``(start, end]``.

    ``left[i]``/``right[i]`` are the one-sided values at the ``i``-th jump of
    ``jump_times``.  Values between nodes come either from a single RK4 step
    off the preceding node (``drift`` set) or from ``evaluator``.
    """

    x0: float
    path: JumpPath
    jump_times: tuple
    left: list
    right: list
    segments: Optional[list] = None
    drift: Optional[Callable] = None
    evaluator: Optional[Callable] = None
    start: float = 0.0
    end: float = 1.0
    backward: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def x_end(self) -> float:
        if self.segments is not None:
            return self.segments[-1].values[-1]
        return self(self.end)

    @property
    def x1(self) -> float:
        return self.x_end

    def __call__(self, t: float) -> float:
        if not self.start <= t <= self.end:
            raise ValueError(f"t={t} outside [{self.start}, {self.end}]")
        i = bisect.bisect_right(self.jump_times, t)
        if self.segments is None:
            return self.evaluator(t)
        seg = self.segments[i]
        k = bisect.bisect_right(seg.times, t) - 1
        if k >= len(seg.times) - 1:
            return seg.values[-1]
        tk = seg.times[k]
        if t == tk:
            return seg.values[k]
        return rk4_step(self.drift, tk, seg.values[k], t - tk)

    def left_limit(self, t: float) -> float:
        """``X_{t-}``; equals ``X_t`` away from jumps."""
        i = bisect.bisect_left(self.jump_times, t)
        if i < len(self.jump_times) and self.jump_times[i] == t:
            return self.left[i]
        return self(t)

    def jump_index(self, s: float) -> int:
        i = bisect.bisect_left(self.jump_times, s)
        if i == len(self.jump_times) or self.jump_times[i] != s:
            raise ValueError(f"{s} is not a jump time of the trajectory")
        return i

    def values(self, ts: Sequence[float]) -> np.ndarray:
        return np.array([self(t) for t in ts])

    def integrate(self, g: Callable, a: float, b: float, h: float) -> float:
        """``int_a^b g(r, X_r) dr`` with Simpson on the stored RK4 grid.

        ``g`` is vectorised.  Whole segments reuse their nodes; a partially
        covered segment gets a fresh uniform grid evaluated through the
        dense interpolant.
        """
        if b <= a:
            return 0.0
        edges = (self.start,) + tuple(self.jump_times) + (self.end,)
        total = 0.0
        for i in range(len(edges) - 1):
            lo, hi = max(a, edges[i]), min(b, edges[i + 1])
            if hi <= lo:
                continue
            seg = self.segments[i] if self.segments is not None else None
            if seg is not None and lo == seg.start and hi == seg.end and len(seg.times) > 1:
                ts, xs, dt = seg.times, seg.values, seg.dt
            else:
                n = n_steps(hi - lo, h)
                dt = (hi - lo) / n
                ts = [lo + k * dt for k in range(n)] + [hi]
                # the right end of a cadlag segment is its left limit
                xs = [self(t) for t in ts[:-1]] + [self.left_limit(hi) if hi == edges[i + 1] else self(hi)]
            total += simpson(g(np.asarray(ts, float), np.asarray(xs, float)), dt)
        return total

    # serialization --------------------------------------------------------

    def to_record(self, n_grid: int = 101) -> dict:
        if "samples" in self.meta and n_grid == len(self.meta["samples"]):
            samples = self.meta["samples"]
        else:
            grid = np.linspace(self.start, self.end, n_grid).tolist()
            samples = [[t, float(self(t))] for t in grid]
        return {
            "x0": float(self.x0),
            "jump_times": list(self.jump_times),
            "samples": samples,
            "jumps": [
                {"t": s, "left": float(l), "right": float(r)}
                for s, l, r in zip(self.jump_times, self.left, self.right)
            ],
            "backward": self.backward,
            "start": self.start,
            "end": self.end,
        }

    def to_json(self, n_grid: int = 101) -> str:
        return json.dumps(self.to_record(n_grid), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Trajectory":
        """Rebuild from JSON; values between samples are linearly interpolated."""
        rec = json.loads(text)
        samples = [[float(t), float(x)] for t, x in rec["samples"]]
        jt = tuple(float(s) for s in rec["jump_times"])
        left = [float(j["left"]) for j in rec["jumps"]]
        right = [float(j["right"]) for j in rec["jumps"]]
        ts = np.array([s[0] for s in samples])
        xs = np.array([s[1] for s in samples])

        def ev(t):
            k = bisect.bisect_right(jt, t)
            lo = jt[k - 1] if k else -math.inf
            hi = jt[k] if k < len(jt) else math.inf
            pts = [(lo, right[k - 1])] if k else []
            sel = (ts >= lo) & (ts < hi)
            pts += list(zip(ts[sel], xs[sel]))
            if k < len(jt):
                pts.append((hi, left[k]))
            px, py = zip(*sorted(pts))
            return float(np.interp(t, px, py))

        start, end = float(rec.get("start", 0.0)), float(rec.get("end", 1.0))
        path = JumpPath(tuple(s for s in jt if s > 0), max(1.0, end))
        return cls(float(rec["x0"]), path, jt, left, right, evaluator=ev, start=start, end=end,
                   backward=bool(rec.get("backward", False)), meta={"samples": samples})
