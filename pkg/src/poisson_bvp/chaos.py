"""Truncated Poisson-Ito chaos series with constant, indicator and first-order kernels.

For the indicator family the multiple integrals are Charlier polynomials
of the count: with generating function
``sum_n w^n / n! I_n(1_{[0,s]}^{(x)n}) = e^{-ws} (1+w)^{N_s}`` one gets
``C_0 = 1``, ``C_1 = N - s`` and
``C_{n+1} = (N - n - s) C_n - n s C_{n-1}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import CapabilityError
from .fields import TimeFunction, gauss_integral
from .linear import LinearCoefficients
from .paths import JumpPath

__all__ = [
    "ConstKernel",
    "IndicatorKernel",
    "FunctionKernel",
    "ChaosTerm",
    "ChaosSeries",
    "charlier",
    "charlier_exact",
    "multiple_integral",
    "eval_chaos",
    "build_case5_chaos",
    "build_first_order_chaos",
    "skorohod_integral_series",
    "DEFAULT_ORDER",
]

DEFAULT_ORDER = 30


@dataclass(frozen=True)
class ConstKernel:
    """``1`` on ``[0, 1]^n``."""

    @property
    def s(self) -> float:
        return 1.0

    def to_json(self):
        return "const"


@dataclass(frozen=True)
class IndicatorKernel:
    """``1_{[0, t]}^{(x)n}``."""

    t: float

    @property
    def s(self) -> float:
        return self.t

    def to_json(self):
        return {"indicator": self.t}


@dataclass(frozen=True)
class FunctionKernel:
    """An order-one kernel ``g`` with its integral over ``[0, 1]`` precomputed."""

    fn: Callable[[float], float]
    integral: float
    name: str = "g"

    def to_json(self):
        raise CapabilityError("function kernels have no JSON form")


Kernel = Union[ConstKernel, IndicatorKernel, FunctionKernel]


@dataclass(frozen=True)
class ChaosTerm:
    n: int
    c: float
    kernel: Kernel


@dataclass
class ChaosSeries:
    """``sum c_n I_n(kernel_n)``.

    ``families`` lists ``(C, s)`` pairs for which the terms
    ``C (-1)^n / n! I_n(1_{[0,s]}^{(x)n})`` were truncated; they drive
    :meth:`tail_bound`.
    """

    terms: list
    truncation_order: int = DEFAULT_ORDER
    families: list = field(default_factory=list)

    def __call__(self, omega: JumpPath) -> float:
        return eval_chaos(self, omega)

    def tail_bound(self, omega: JumpPath) -> float:
        """Upper bound on the dropped terms at ``omega``.

        The ``n``-th coefficient of ``e^{-ws}(1+w)^N`` is at most
        ``sum_k binom(N, k) s^{n-k} / (n-k)!``, so the tail beyond order
        ``m`` is at most ``2^N sum_{j > m - N} s^j / j!``.
        """
        total = 0.0
        m = self.truncation_order
        for C, s in self.families:
            N = omega.count(0.0, s)
            j0 = max(m - N + 1, 0)
            tail = _exp_tail(s, j0)
            total += abs(C) * 2.0 ** N * tail
        return total

    def to_json(self) -> str:
        return json.dumps([{"n": t.n, "c_n": t.c, "kernel": t.kernel.to_json()} for t in self.terms],
                          indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ChaosSeries":
        terms = []
        for rec in json.loads(text):
            k = rec["kernel"]
            if k == "const":
                kern = ConstKernel()
            elif isinstance(k, dict) and set(k) == {"indicator"}:
                kern = IndicatorKernel(float(k["indicator"]))
            else:
                raise CapabilityError(f"unsupported kernel {k!r}")
            terms.append(ChaosTerm(int(rec["n"]), float(rec["c_n"]), kern))
        order = max((t.n for t in terms), default=0)
        return cls(terms, order)


def _exp_tail(s: float, j0: int) -> float:
    """``sum_{j >= j0} s^j / j!`` for ``0 <= s <= 1``."""
    if s <= 0.0:
        return 1.0 if j0 <= 0 else 0.0
    term = s ** j0 / math.factorial(j0)
    total = 0.0
    j = j0
    while term > 1e-300 and (total == 0.0 or term > 1e-18 * total):
        total += term
        j += 1
        term *= s / j
    return total


def charlier(n_max: int, s: float, count: int) -> np.ndarray:
    """``[I_0, ..., I_{n_max}]`` of ``1_{[0,s]}^{(x)n}`` given ``N_s = count``."""
    out = np.zeros(n_max + 1)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = count - s
    for n in range(1, n_max):
        out[n + 1] = (count - n - s) * out[n] - n * s * out[n - 1]
    return out


def charlier_exact(n: int, s, count: int):
    """Reference value ``sum_k binom(n,k) (-s)^{n-k} (N)_k`` in the arithmetic of ``s``."""
    total = 0
    for k in range(0, min(n, count) + 1):
        falling = math.prod(range(count - k + 1, count + 1))
        total += math.comb(n, k) * (-s) ** (n - k) * falling
    return total


def multiple_integral(n: int, kernel: Kernel, omega: JumpPath) -> float:
    if isinstance(kernel, FunctionKernel):
        if n != 1:
            raise CapabilityError("function kernels are supported at order one only")
        return float(sum(kernel.fn(s) for s in omega.times)) - kernel.integral
    if isinstance(kernel, (ConstKernel, IndicatorKernel)):
        s = kernel.s
        return float(charlier(n, s, omega.count(0.0, s))[n])
    raise CapabilityError(f"unsupported kernel {kernel!r}")


def eval_chaos(series: ChaosSeries, omega: JumpPath) -> float:
    cache = {}
    total = 0.0
    for term in series.terms:
        k = term.kernel
        if isinstance(k, (ConstKernel, IndicatorKernel)):
            s = k.s
            arr = cache.get(s)
            if arr is None or len(arr) <= term.n:
                top = max(t.n for t in series.terms)
                arr = cache[s] = charlier(top, s, omega.count(0.0, s))
            total += term.c * arr[term.n]
        else:
            total += term.c * multiple_integral(term.n, k, omega)
    return total


def _family(C: float, kernel: Kernel, order: int) -> list:
    return [ChaosTerm(n, C * (-1.0) ** n / math.factorial(n), kernel) for n in range(order + 1)]


def build_case5_chaos(f2, psi0: float, xstar: float, t: float, order: int = DEFAULT_ORDER) -> ChaosSeries:
    """Series for ``X_t = A(t)[x* 1{N_1=0} + psi(0) 1{N_t=0, N_1>=1}]``.

    Written as ``A(t)(x* - psi(0)) 1{N_1=0} + A(t) psi(0) 1{N_t=0}``; both
    indicators come from the generating function at ``w = -1``, with
    weights ``e^{-1}`` and ``e^{-t}`` respectively.
    """
    if not callable(f2):
        f2 = TimeFunction.from_descriptor(f2)
    if isinstance(f2, TimeFunction):
        At = math.exp(f2.integral(0.0, t))
    else:
        At = math.exp(gauss_integral(f2, 0.0, t))
    c1 = At * (xstar - psi0) * math.exp(-1.0)
    c2 = At * psi0 * math.exp(-t)
    k2 = IndicatorKernel(float(t))
    terms = _family(c1, ConstKernel(), order) + _family(c2, k2, order)
    return ChaosSeries(terms, order, [(c1, 1.0), (c2, float(t))])


def build_first_order_chaos(lc: LinearCoefficients, a: float, b: float, t: float,
                            n_quad: int = 4) -> ChaosSeries:
    """First-order expansion of the x-free linear Skorohod problem with ``psi(x) = a x + b``.

    With ``kappa = a A(1) / (1 - a A(1))``,
    ``X_t = c(t) + I_1(g_t)`` where
    ``g_t(r) = A(t)(1_{[0,t]}(r) + kappa) F1(r) / A(r)`` and
    ``c(t) = b A(t) / (1 - a A(1)) + A(t) int_0^1 (1_{[0,t]} + kappa) f1 / A``.
    """
    if not (lc.F2.is_constant and lc.F2.lo == 0.0):
        raise CapabilityError("first-order chaos needs F2 = 0")
    A = lambda r: np.exp(lc.f2.integral(0.0, r))
    A1 = float(A(1.0))
    if a * A1 == 1.0:
        raise CapabilityError("a A(1) = 1: the boundary relation is degenerate")
    kappa = a * A1 / (1.0 - a * A1)
    At = float(A(t))

    def piecewise(h):
        # int_0^1 (1_{[0,t]} + kappa) h, split at t so each piece is smooth
        lo = sum(gauss_integral(h, t * k / n_quad, t * (k + 1) / n_quad) for k in range(n_quad)) if t > 0 else 0.0
        hi = sum(gauss_integral(h, t + (1 - t) * k / n_quad, t + (1 - t) * (k + 1) / n_quad)
                 for k in range(n_quad)) if t < 1 else 0.0
        return (1.0 + kappa) * lo + kappa * hi

    f1, F1 = lc.f1.fn, lc.F1.fn
    c0 = b * At / (1.0 - a * A1) + At * piecewise(lambda r: f1(r) / A(r))

    def g(r):
        ind = 1.0 if r <= t else 0.0
        return At * (ind + kappa) * float(F1(r)) / float(A(r))

    g_int = At * piecewise(lambda r: F1(r) / A(r))
    return ChaosSeries([ChaosTerm(0, c0, ConstKernel()), ChaosTerm(1, 1.0, FunctionKernel(g, g_int, "g_t"))], 1)


def skorohod_integral_series(coeffs) -> ChaosSeries:
    """``delta(u)`` for ``u_t = sum_n a_n I_n(1_{[0,t]}^{(x)n})``.

    The symmetrisation of ``1_{[0,t]}^{(x)n}(s_1..s_n) 1_{[0,1]}(t)`` in all
    ``n+1`` variables integrates against ``I_{n+1}`` to ``I_{n+1}(1) / (n+1)``.
    """
    terms = [ChaosTerm(n + 1, a / (n + 1), ConstKernel()) for n, a in enumerate(coeffs)]
    return ChaosSeries(terms, len(coeffs))
