"""Coefficient fields ``(t, x) -> R``, time functions and boundary maps.

Every callable here accepts either Python floats or numpy arrays.  Scalar
calls go through :mod:`math` because the scalar ODE loop evaluates the
coefficients millions of times and ``np.sin`` on a float is several times
slower than ``math.sin``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import CapabilityError

__all__ = ["TimeFunction", "CoefficientField", "BoundaryMap"]


def _sin(v):
    return np.sin(v) if isinstance(v, np.ndarray) else math.sin(v)


def _cos(v):
    return np.cos(v) if isinstance(v, np.ndarray) else math.cos(v)


def _tanh(v):
    return np.tanh(v) if isinstance(v, np.ndarray) else math.tanh(v)


def _sech2(v):
    c = np.cosh(v) if isinstance(v, np.ndarray) else math.cosh(min(abs(v), 700.0))
    return 1.0 / (c * c)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def gauss_integral(fn, a, b):
    """20-point Gauss-Legendre integral of a smooth ``fn`` over ``[a, b]``.

    ``a`` and ``b`` may be arrays of equal shape; the result has that shape.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = mid[..., None] + half[..., None] * _GL_NODES
    vals = np.asarray(fn(nodes), dtype=float) * np.ones_like(nodes)
    out = half * (vals @ _GL_WEIGHTS)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TimeFunction:
    """A continuous function on ``[0, 1]`` with derivative, primitive and range.

    ``lo``/``hi`` bound the values on ``[0, 1]``; for the built-in families
    they are exact (endpoints plus interior critical points).
    """

    fn: Callable
    deriv: Optional[Callable] = None
    primitive: Optional[Callable] = None
    lo: float = -math.inf
    hi: float = math.inf
    descriptor: object = None

    def __call__(self, t):
        return self.fn(t)

    @property
    def sup_abs(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    @property
    def is_constant(self) -> bool:
        return self.lo == self.hi

    def integral(self, a, b):
        """``int_a^b fn``; exact for the built-in families."""
        if self.primitive is not None:
            return self.primitive(b) - self.primitive(a)
        return gauss_integral(self.fn, a, b)

    def derivative(self, t):
        if self.deriv is None:
            raise CapabilityError("time function has no declared derivative")
        return self.deriv(t)

    # constructors ---------------------------------------------------------

    @classmethod
    def const(cls, c: float) -> "TimeFunction":
        c = float(c)
        return cls(
            fn=lambda t: c if not isinstance(t, np.ndarray) else np.full_like(t, c, dtype=float),
            deriv=lambda t: 0.0 if not isinstance(t, np.ndarray) else np.zeros_like(t, dtype=float),
            primitive=lambda t: c * t,
            lo=c,
            hi=c,
            descriptor=c,
        )

    @classmethod
    def poly(cls, coeffs) -> "TimeFunction":
        """``c0 + c1 t + c2 t^2 + ...``"""
        coeffs = [float(c) for c in coeffs] or [0.0]
        if len(coeffs) == 1:
            return cls.const(coeffs[0])
        rev = coeffs[::-1]
        dcoef = [k * c for k, c in enumerate(coeffs)][1:]
        drev = dcoef[::-1]
        prev = [c / (k + 1) for k, c in enumerate(coeffs)][::-1] + [0.0]

        def horner(r):
            def ev(t):
                acc = r[0]
                for c in r[1:]:
                    acc = acc * t + c
                return acc
            return ev

        p = np.polynomial.Polynomial(coeffs)
        crit = [z.real for z in p.deriv().roots() if abs(z.imag) < 1e-14 and 0 < z.real < 1]
        vals = [p(0.0), p(1.0)] + [p(z) for z in crit]
        return cls(horner(rev), horner(drev), horner(prev), float(min(vals)), float(max(vals)),
                   {"poly": coeffs})

    @classmethod
    def sin(cls, amp: float = 1.0, freq: float = 1.0, phase: float = 0.0) -> "TimeFunction":
        """``amp * sin(freq t + phase)``"""
        return cls._trig(amp, freq, phase, "sin")

    @classmethod
    def cos(cls, amp: float = 1.0, freq: float = 1.0, phase: float = 0.0) -> "TimeFunction":
        """``amp * cos(freq t + phase) = amp * sin(freq t + phase + pi/2)``"""
        tf = cls._trig(amp, freq, phase + math.pi / 2, "sin")
        return replace(tf, descriptor={"cos": {"amp": amp, "freq": freq, "phase": phase}})

    @classmethod
    def _trig(cls, amp, freq, phase, _kind):
        amp, freq, phase = float(amp), float(freq), float(phase)
        fn = lambda t: amp * _sin(freq * t + phase)
        deriv = lambda t: amp * freq * _cos(freq * t + phase)
        prim = None if freq == 0 else (lambda t: -amp / freq * _cos(freq * t + phase))
        cand = [0.0, 1.0]
        if freq != 0:
            lo_arg, hi_arg = sorted((phase, freq + phase))
            k0 = math.ceil((lo_arg - math.pi / 2) / math.pi)
            k1 = math.floor((hi_arg - math.pi / 2) / math.pi)
            cand += [((math.pi / 2 + k * math.pi) - phase) / freq for k in range(k0, k1 + 1)]
        vals = [fn(c) for c in cand]
        return cls(fn, deriv, prim, min(vals), max(vals),
                   {"sin": {"amp": amp, "freq": freq, "phase": phase}})

    @classmethod
    def sum(cls, *parts: "TimeFunction") -> "TimeFunction":
        parts = tuple(parts)
        fn = lambda t: sum(p.fn(t) for p in parts)
        deriv = None
        if all(p.deriv is not None for p in parts):
            deriv = lambda t: sum(p.deriv(t) for p in parts)
        prim = None
        if all(p.primitive is not None for p in parts):
            prim = lambda t: sum(p.primitive(t) for p in parts)
        return cls(fn, deriv, prim, sum(p.lo for p in parts), sum(p.hi for p in parts),
                   {"sum": [p.descriptor for p in parts]})

    @classmethod
    def from_descriptor(cls, desc) -> "TimeFunction":
        """Parse ``3.0``, ``{"poly": [...]}``, ``{"sin": {...}}``, ``{"cos": {...}}``, ``{"sum": [...]}``."""
        if isinstance(desc, TimeFunction):
            return desc
        if isinstance(desc, (int, float)) and not isinstance(desc, bool):
            return cls.const(desc)
        if isinstance(desc, dict) and len(desc) == 1:
            (key, val), = desc.items()
            if key == "const":
                return cls.const(val)
            if key == "poly":
                return cls.poly(val)
            if key in ("sin", "cos"):
                if not isinstance(val, dict):
                    raise ValueError(f"'{key}' expects an object with amp/freq/phase")
                unknown = set(val) - {"amp", "freq", "phase"}
                if unknown:
                    raise ValueError(f"unknown keys for '{key}': {sorted(unknown)}")
                return getattr(cls, key)(**val)
            if key == "sum":
                return cls.sum(*(cls.from_descriptor(d) for d in val))
        raise ValueError(f"unrecognised time-function descriptor: {desc!r}")


def _as_tf(v) -> TimeFunction:
    return TimeFunction.from_descriptor(v)


@dataclass(frozen=True)
class CoefficientField:
    """A coefficient ``(t, x) -> R`` with optional partials and declared constants.

    ``lipschitz`` and ``sup_at_zero`` are the constants of the global
    Lipschitz/growth hypotheses; ``slope_lo``/``slope_hi`` bound the
    difference quotients in ``x``; ``alpha``/``beta`` are the per-time upper
    and lower slope envelopes used by the backward conversion.
    """

    eval: Callable
    d1: Optional[Callable] = None
    d2: Optional[Callable] = None
    d22: Optional[Callable] = None
    lipschitz: Optional[float] = None
    sup_at_zero: Optional[float] = None
    slope_lo: Optional[float] = None
    slope_hi: Optional[float] = None
    alpha: Optional[Callable] = None
    beta: Optional[Callable] = None
    autonomous: bool = False
    x_free: bool = False
    name: str = ""
    linear_parts: Optional[tuple] = field(default=None, compare=False)

    def __call__(self, t, x):
        return self.eval(t, x)

    def require(self, *names: str) -> None:
        for n in names:
            if getattr(self, n) is None:
                raise CapabilityError(f"coefficient {self.name or '<anonymous>'} lacks analytic {n}")

    def without_partials(self) -> "CoefficientField":
        return replace(self, d1=None, d2=None, d22=None)

    def __sub__(self, other: "CoefficientField") -> "CoefficientField":
        a, b = self, other
        ev = lambda t, x: a.eval(t, x) - b.eval(t, x)
        d1 = (lambda t, x: a.d1(t, x) - b.d1(t, x)) if a.d1 and b.d1 else None
        d2 = (lambda t, x: a.d2(t, x) - b.d2(t, x)) if a.d2 and b.d2 else None
        add = lambda p, q: None if p is None or q is None else p + q
        sub = lambda p, q: None if p is None or q is None else p - q
        lin = None
        if a.linear_parts and b.linear_parts:
            lin = (TimeFunction.sum(a.linear_parts[0], _neg(b.linear_parts[0])),
                   TimeFunction.sum(a.linear_parts[1], _neg(b.linear_parts[1])))
        return CoefficientField(
            ev, d1, d2, None,
            lipschitz=add(a.lipschitz, b.lipschitz),
            sup_at_zero=add(a.sup_at_zero, b.sup_at_zero),
            slope_lo=sub(a.slope_lo, b.slope_hi),
            slope_hi=sub(a.slope_hi, b.slope_lo),
            autonomous=a.autonomous and b.autonomous,
            x_free=a.x_free and b.x_free,
            name=f"({a.name} - {b.name})",
            linear_parts=lin,
        )

    def check_declared(self, t_grid=None, x_grid=None, rtol: float = 1e-12) -> list:
        """Spot-check the declared slope constants on a grid.

        Returns a list of ``(constant, t, x, y, quotient)`` violations.
        """
        t_grid = np.linspace(0.0, 1.0, 11) if t_grid is None else np.asarray(t_grid, float)
        x_grid = np.linspace(-5.0, 5.0, 41) if x_grid is None else np.asarray(x_grid, float)
        bad = []
        X, Y = np.meshgrid(x_grid, x_grid, indexing="ij")
        sel = X > Y
        X, Y = X[sel], Y[sel]
        for t in t_grid:
            tt = np.full_like(X, t)
            q = (self.eval(tt, X) - self.eval(tt, Y)) / (X - Y)
            slack = rtol * (1.0 + np.abs(q))
            checks = [
                ("lipschitz", self.lipschitz, np.abs(q) > (self.lipschitz or 0) + slack),
                ("slope_lo", self.slope_lo, q < (self.slope_lo or 0) - slack),
                ("slope_hi", self.slope_hi, q > (self.slope_hi or 0) + slack),
            ]
            for name, decl, viol in checks:
                if decl is not None and np.any(viol):
                    i = int(np.argmax(viol))
                    bad.append((name, float(t), float(X[i]), float(Y[i]), float(q[i])))
        return bad

    # constructors ---------------------------------------------------------

    @classmethod
    def zero(cls) -> "CoefficientField":
        return cls.linear(0.0, 0.0, name="0")

    @classmethod
    def constant(cls, c: float) -> "CoefficientField":
        return cls.linear(c, 0.0, name=f"{c}")

    @classmethod
    def linear(cls, a=0.0, b=0.0, name: str = "") -> "CoefficientField":
        """``a(t) + b(t) x`` with ``a``, ``b`` numbers, descriptors or :class:`TimeFunction`."""
        a, b = _as_tf(a), _as_tf(b)
        af, bf, ad, bd = a.fn, b.fn, a.deriv, b.deriv
        if a.is_constant and b.is_constant:
            a0, b0 = a.lo, b.lo
            ev = lambda t, x: a0 + b0 * x
            d1 = lambda t, x: 0.0 * x
            d2 = lambda t, x: b0 + 0.0 * x
        else:
            ev = lambda t, x: af(t) + bf(t) * x
            d1 = lambda t, x: ad(t) + bd(t) * x
            d2 = lambda t, x: bf(t) + 0.0 * x
        return cls(
            ev, d1, d2, lambda t, x: 0.0 * x,
            lipschitz=b.sup_abs,
            sup_at_zero=a.sup_abs,
            slope_lo=b.lo,
            slope_hi=b.hi,
            alpha=bf,
            beta=bf,
            autonomous=a.is_constant and b.is_constant,
            x_free=b.is_constant and b.lo == 0.0,
            name=name or f"linear({a.descriptor}, {b.descriptor})",
            linear_parts=(a, b),
        )

    @classmethod
    def sine(cls, amp: float, slope: float = 0.0, drift=0.0, name: str = "") -> "CoefficientField":
        """``amp sin(x) + slope x + drift(t)``"""
        c = _as_tf(drift)
        cf, cd = c.fn, c.deriv
        return cls(
            lambda t, x: amp * _sin(x) + slope * x + cf(t),
            lambda t, x: cd(t) + 0.0 * x,
            lambda t, x: amp * _cos(x) + slope,
            lambda t, x: -amp * _sin(x),
            lipschitz=abs(amp) + abs(slope),
            sup_at_zero=c.sup_abs,
            slope_lo=slope - abs(amp),
            slope_hi=slope + abs(amp),
            alpha=lambda t: slope + abs(amp) + 0.0 * t,
            beta=lambda t: slope - abs(amp) + 0.0 * t,
            autonomous=c.is_constant,
            name=name or f"sine({amp}, {slope}, {c.descriptor})",
        )

    @classmethod
    def tanh(cls, amp: float, slope: float = 0.0, drift=0.0, name: str = "") -> "CoefficientField":
        """``amp tanh(x) + slope x + drift(t)``"""
        c = _as_tf(drift)
        cf, cd = c.fn, c.deriv
        lo, hi = slope + min(amp, 0.0), slope + max(amp, 0.0)
        return cls(
            lambda t, x: amp * _tanh(x) + slope * x + cf(t),
            lambda t, x: cd(t) + 0.0 * x,
            lambda t, x: amp * _sech2(x) + slope,
            lambda t, x: -2.0 * amp * _sech2(x) * _tanh(x),
            lipschitz=max(abs(lo), abs(hi)),
            sup_at_zero=c.sup_abs,
            slope_lo=lo,
            slope_hi=hi,
            alpha=lambda t: hi + 0.0 * t,
            beta=lambda t: lo + 0.0 * t,
            autonomous=c.is_constant,
            name=name or f"tanh({amp}, {slope}, {c.descriptor})",
        )


def _neg(tf: TimeFunction) -> TimeFunction:
    fn, d, p = tf.fn, tf.deriv, tf.primitive
    return TimeFunction(
        lambda t: -fn(t),
        None if d is None else (lambda t: -d(t)),
        None if p is None else (lambda t: -p(t)),
        -tf.hi, -tf.lo, {"neg": tf.descriptor},
    )


@dataclass(frozen=True)
class BoundaryMap:
    """The boundary function ``psi`` in ``X_0 = psi(X_1)``.

    ``slope_hi`` is a one-sided Lipschitz constant: ``psi(x) - psi(y) <=
    slope_hi (x - y)`` for ``x > y``; ``slope_lo`` the matching lower one.
    """

    eval: Callable
    monotone_nonincreasing: bool = True
    dpsi: Optional[Callable] = None
    bound: Optional[float] = None
    slope_lo: Optional[float] = None
    slope_hi: Optional[float] = None
    constant_value: Optional[float] = None
    name: str = ""

    def __call__(self, x):
        return self.eval(x)

    def derivative(self, x):
        if self.dpsi is None:
            raise CapabilityError(f"boundary map {self.name or '<anonymous>'} has no derivative")
        return self.dpsi(x)

    def check_monotone(self, grid=None) -> bool:
        grid = np.linspace(-50.0, 50.0, 2001) if grid is None else np.asarray(grid, float)
        return bool(np.all(np.diff(self.eval(grid)) <= 0.0))

    @classmethod
    def affine(cls, a: float, b: float) -> "BoundaryMap":
        """``psi(x) = a x + b``"""
        a, b = float(a), float(b)
        return cls(
            lambda x: a * x + b,
            monotone_nonincreasing=a <= 0,
            dpsi=lambda x: a + 0.0 * x,
            bound=abs(b) if a == 0 else None,
            slope_lo=a,
            slope_hi=a,
            constant_value=b if a == 0 else None,
            name=f"affine({a}, {b})",
        )

    @classmethod
    def constant(cls, c: float) -> "BoundaryMap":
        return cls.affine(0.0, c)

    @classmethod
    def clamped(cls, a: float, b: float, lo: float, hi: float) -> "BoundaryMap":
        """``clip(a x + b, lo, hi)``"""
        a, b, lo, hi = float(a), float(b), float(lo), float(hi)
        if lo > hi:
            raise ValueError("clamped boundary map needs lo <= hi")

        def ev(x):
            if isinstance(x, np.ndarray):
                return np.clip(a * x + b, lo, hi)
            return min(max(a * x + b, lo), hi)

        def d(x):
            v = a * x + b
            if isinstance(v, np.ndarray):
                return np.where((v > lo) & (v < hi), a, 0.0)
            return a if lo < v < hi else 0.0

        return cls(ev, a <= 0, d, max(abs(lo), abs(hi)), min(a, 0.0), max(a, 0.0),
                   name=f"clamped({a}, {b}, {lo}, {hi})")

    @classmethod
    def tanh(cls, c: float, k: float) -> "BoundaryMap":
        """``psi(x) = c - k tanh(x)``, bounded and smooth."""
        c, k = float(c), float(k)
        return cls(
            lambda x: c - k * _tanh(x),
            monotone_nonincreasing=k >= 0,
            dpsi=lambda x: -k * _sech2(x),
            bound=abs(c) + abs(k),
            slope_lo=min(-k, 0.0),
            slope_hi=max(-k, 0.0),
            name=f"tanh({c}, {k})",
        )
