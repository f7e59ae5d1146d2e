"""Poisson jump paths on [0, horizon] and points of the canonical Poisson space.

A :class:`JumpPath` is a strictly increasing tuple of jump instants.  The
empty path is the special no-jump point ``a`` of the canonical space; there
is no separate tag for it.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "JumpPath",
    "Rng",
    "EMPTY",
    "as_generator",
    "sample_path",
    "sample_conditional",
    "count_jumps",
    "remove_jump",
    "insert_jump",
]


@dataclass(frozen=True)
class JumpPath:
    """Sorted jump times ``s_1 < ... < s_n`` in ``(0, horizon]``."""

    times: tuple[float, ...] = ()
    horizon: float = 1.0

    def __post_init__(self):
        times = tuple(float(s) for s in self.times)
        object.__setattr__(self, "times", times)
        for s in times:
            if not np.isfinite(s) or s <= 0.0 or s > self.horizon:
                raise ValueError(f"jump time {s!r} outside (0, {self.horizon}]")
        for s0, s1 in zip(times, times[1:]):
            if not s0 < s1:
                raise ValueError(f"jump times must be strictly increasing, got {s0!r} >= {s1!r}")

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self):
        return iter(self.times)

    def __getitem__(self, i):
        return self.times[i]

    @property
    def is_empty(self) -> bool:
        return not self.times

    def count(self, s: float, t: float) -> int:
        """Number of jumps in ``(s, t]``."""
        return count_jumps(self, s, t)

    def first_jump(self) -> float:
        """``S_1``, or ``inf`` on the empty path."""
        return self.times[0] if self.times else float("inf")

    def to_json(self) -> str:
        return json.dumps(list(self.times))

    @classmethod
    def from_json(cls, text: str, horizon: float = 1.0) -> "JumpPath":
        data = json.loads(text)
        if not isinstance(data, list):
            raise ValueError("a path serializes as a JSON array of times")
        return cls(tuple(data), horizon)


EMPTY = JumpPath()


@dataclass(frozen=True)
class Rng:
    """Seed for one reproducible random stream.

    ``(seed, stream_id)`` fully determines the draws; Monte Carlo drivers give
    path ``i`` the stream ``Rng(seed, i)`` so results do not depend on how the
    work is split.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def stream(self, stream_id: int) -> "Rng":
        return Rng(self.seed, stream_id)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, Rng):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


def sample_path(rng, horizon: float = 1.0) -> JumpPath:
    """Jumps of a unit-rate Poisson process on ``[0, horizon]``.

    Arrival gaps are drawn one at a time from Exp(1) until the horizon is
    passed, so the first draw alone decides whether the path is empty.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    gen = as_generator(rng)
    times = []
    s = gen.exponential()
    while s <= horizon:
        times.append(s)
        s += gen.exponential()
    return JumpPath(tuple(times), horizon)


def sample_conditional(rng, n: int, t: float) -> JumpPath:
    """Jump times given ``N_t = n``: order statistics of ``n`` Uniform(0, t) draws."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return EMPTY
    if not 0 < t <= 1:
        raise ValueError("t must lie in (0, 1]")
    gen = as_generator(rng)
    u = np.sort(gen.uniform(0.0, t, size=n))
    # Uniform(0, t) can return exactly 0.0 in principle.
    while u[0] <= 0.0 or np.any(np.diff(u) <= 0.0):
        u = np.sort(gen.uniform(0.0, t, size=n))
    return JumpPath(tuple(u.tolist()))


def count_jumps(path: JumpPath, s: float, t: float) -> int:
    """Number of jump times in the half-open interval ``(s, t]``."""
    if s > t:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    return bisect.bisect_right(path.times, t) - bisect.bisect_right(path.times, s)


def remove_jump(path: JumpPath, j: int) -> JumpPath:
    """Drop the ``j``-th jump (1-based): ``(s_1,...,s_{j-1},s_{j+1},...,s_n)``."""
    if not 1 <= j <= len(path):
        raise ValueError(f"jump index {j} out of range 1..{len(path)}")
    times = path.times[: j - 1] + path.times[j:]
    return JumpPath(times, path.horizon)


def insert_jump(path: JumpPath, t: float) -> JumpPath:
    """Add a jump at ``t`` keeping the order; a collision is an error."""
    if t in path.times:
        raise ValueError(f"time {t} already is a jump of the path")
    k = bisect.bisect_left(path.times, t)
    return JumpPath(path.times[:k] + (float(t),) + path.times[k:], path.horizon)


def paths_to_matrix(paths: Sequence[JumpPath]) -> np.ndarray:
    """Pad a batch of paths into a ``(B, K)`` array, ``inf`` past the last jump."""
    width = max((len(p) for p in paths), default=0)
    out = np.full((len(paths), max(width, 1)), np.inf)
    for i, p in enumerate(paths):
        if p.times:
            out[i, : len(p)] = p.times
    return out
