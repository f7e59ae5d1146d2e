"""Problem definitions, the JSON spec language and named presets."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .boundary import (DEFAULT_TOL, deterministic_fixed_point, solve_backward_bvp,
                       solve_forward_bvp)
from .errors import PoissonBVPError
from .fields import BoundaryMap, CoefficientField, TimeFunction
from .flow import DEFAULT_STEP
from .linear import DEFAULT_QUAD, LinearCoefficients
from .paths import JumpPath

__all__ = ["Problem", "SpecError", "parse_spec", "load_spec", "PRESETS", "preset"]

KINDS = ("forward", "backward", "skorohod")


class SpecError(PoissonBVPError, ValueError):
    """Malformed or inadmissible problem specification."""


@dataclass
class Problem:
    kind: str
    f: CoefficientField
    F: CoefficientField
    psi: BoundaryMap
    tol: float = DEFAULT_TOL
    ode_step: float = DEFAULT_STEP
    quad_step: float = DEFAULT_QUAD
    linear: Optional[LinearCoefficients] = None
    x: float = 0.0
    name: str = ""
    mc: dict = field(default_factory=dict)
    _skorohod: object = field(default=None, repr=False)

    @property
    def drift(self) -> CoefficientField:
        """Drift of the pathwise ODE: ``f`` for forward/backward, ``f - F`` for Skorohod."""
        return self.f - self.F if self.kind == "skorohod" else self.f

    def xstar(self) -> float:
        return deterministic_fixed_point(self.drift, self.psi, self.tol, self.ode_step)

    def solve(self, path: JumpPath, tol: Optional[float] = None):
        tol = self.tol if tol is None else tol
        if self.kind == "forward":
            return solve_forward_bvp(self.f, self.F, self.psi, path, tol, self.ode_step)
        if self.kind == "backward":
            return solve_backward_bvp(self.f, self.F, self.psi, path, tol, self.ode_step)
        from .skorohod import SkorohodSolver

        if self._skorohod is None or self._skorohod.tol != tol:
            self._skorohod = SkorohodSolver(self.f, self.F, self.psi, tol, self.ode_step)
        return self._skorohod.solve(path)

    def batch_jump(self):
        """Vectorised post-jump map ``(t, y-) -> y`` for the Monte Carlo kernel."""
        F = self.F
        Fe = F.eval
        if self.kind == "forward":
            return lambda t, y: y + Fe(t, y)
        if self.kind == "backward":
            return lambda t, y: _invert_vec(F, t, y)
        from .errors import CapabilityError

        raise CapabilityError("Skorohod solutions are not pathwise flows; use SkorohodSolver")

    def with_fields(self, **kw) -> "Problem":
        return replace(self, _skorohod=None, **kw)


def _invert_vec(F: CoefficientField, t, y, iters: int = 200):
    """Vectorised bisection for ``z - F(t, z) = y`` under ``alpha < 1``."""
    Fe = F.eval
    gap = 1.0 - np.asarray(F.alpha(t), float)
    d = np.abs(Fe(t, y)) / gap * (1.0 + 1e-9) + 1e-300
    lo, hi = y - d, y + d
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        neg = mid - Fe(t, mid) - y < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return 0.5 * (lo + hi)


# spec language -----------------------------------------------------------------

_TOP_KEYS = {"kind", "preset", "coefficients", "psi", "solver", "mc", "declare_partials",
             "allow_hypothesis_violation", "x", "name"}


def _time(desc, where):
    try:
        return TimeFunction.from_descriptor(desc)
    except (ValueError, TypeError) as e:
        raise SpecError(f"{where}: {e}") from None


def _field(desc, where) -> CoefficientField:
    if not isinstance(desc, dict) or len(desc) != 1:
        raise SpecError(f"{where}: expected a single-key object like {{\"linear\": {{...}}}}")
    (fam, par), = desc.items()
    if not isinstance(par, dict):
        raise SpecError(f"{where}.{fam}: parameters must be an object")
    allowed = {"linear": {"a", "b"}, "sine": {"amp", "slope", "drift"}, "tanh": {"amp", "slope", "drift"}}
    if fam not in allowed:
        raise SpecError(f"{where}: unknown coefficient family {fam!r}")
    extra = set(par) - allowed[fam]
    if extra:
        raise SpecError(f"{where}.{fam}: unknown parameters {sorted(extra)}")
    if fam == "linear":
        return CoefficientField.linear(_time(par.get("a", 0.0), where), _time(par.get("b", 0.0), where),
                                       name=where)
    try:
        amp = float(par["amp"])
        slope = float(par.get("slope", 0.0))
    except (KeyError, TypeError, ValueError):
        raise SpecError(f"{where}.{fam}: needs numeric 'amp' (and optional 'slope')") from None
    drift = _time(par.get("drift", 0.0), where)
    return getattr(CoefficientField, fam)(amp, slope, drift, name=where)


def _psi(desc) -> BoundaryMap:
    if isinstance(desc, (int, float)) and not isinstance(desc, bool):
        return BoundaryMap.constant(desc)
    if not isinstance(desc, dict) or len(desc) != 1:
        raise SpecError("psi: expected a number or a single-key object")
    (fam, par), = desc.items()
    try:
        if fam == "constant":
            return BoundaryMap.constant(float(par))
        if fam == "affine":
            return BoundaryMap.affine(float(par["a"]), float(par["b"]))
        if fam == "clamped":
            return BoundaryMap.clamped(float(par["a"]), float(par["b"]), float(par["lo"]), float(par["hi"]))
        if fam == "tanh":
            return BoundaryMap.tanh(float(par["c"]), float(par["k"]))
    except (KeyError, TypeError, ValueError) as e:
        raise SpecError(f"psi.{fam}: bad parameters ({e})") from None
    raise SpecError(f"psi: unknown family {fam!r}")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k in ("solver", "mc") and isinstance(v, dict):
            out[k] = {**out.get(k, {}), **v}
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_spec(spec) -> Problem:
    """Build a :class:`Problem` from a spec dict (or JSON text)."""
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as e:
            raise SpecError(f"invalid JSON: {e}") from None
    if not isinstance(spec, dict):
        raise SpecError("spec must be a JSON object")
    unknown = set(spec) - _TOP_KEYS
    if unknown:
        raise SpecError(f"unknown spec keys: {sorted(unknown)}")
    if "preset" in spec:
        name = spec["preset"]
        if name not in PRESETS:
            raise SpecError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
        spec = _merge(PRESETS[name], {k: v for k, v in spec.items() if k != "preset"})
        spec.setdefault("name", name)
    kind = spec.get("kind", "forward")
    if kind not in KINDS:
        raise SpecError(f"kind must be one of {KINDS}")
    coef = spec.get("coefficients")
    if not isinstance(coef, dict):
        raise SpecError("missing 'coefficients' object")
    lc = None
    if set(coef) == {"linear"}:
        par = coef["linear"]
        extra = set(par) - {"f1", "f2", "F1", "F2"}
        if extra:
            raise SpecError(f"coefficients.linear: unknown keys {sorted(extra)}")
        lc = LinearCoefficients(*(_time(par.get(k, 0.0), f"coefficients.linear.{k}")
                                  for k in ("f1", "f2", "F1", "F2")))
        f, F = lc.fields()
    elif set(coef) == {"f", "F"}:
        f = _field(coef["f"], "f")
        F = _field(coef["F"], "F")
        if f.linear_parts and F.linear_parts:
            lc = LinearCoefficients(*f.linear_parts, *F.linear_parts)
    else:
        raise SpecError("coefficients: give either {'linear': {...}} or {'f': ..., 'F': ...}")
    if "psi" not in spec:
        raise SpecError("missing 'psi'")
    psi = _psi(spec["psi"])
    solver = spec.get("solver", {})
    extra = set(solver) - {"tol", "ode_step", "quad_step"}
    if extra:
        raise SpecError(f"solver: unknown keys {sorted(extra)}")
    try:
        tol = float(solver.get("tol", DEFAULT_TOL))
        ode_step = float(solver.get("ode_step", DEFAULT_STEP))
        quad_step = float(solver.get("quad_step", DEFAULT_QUAD))
    except (TypeError, ValueError):
        raise SpecError("solver values must be numbers") from None
    if not (tol > 0 and ode_step > 0 and quad_step > 0):
        raise SpecError("solver tolerances and steps must be positive")
    mc = spec.get("mc", {})
    extra = set(mc) - {"n_paths", "seed", "workers"}
    if extra:
        raise SpecError(f"mc: unknown keys {sorted(extra)}")
    if not spec.get("declare_partials", True):
        f, F = f.without_partials(), F.without_partials()
    allow = bool(spec.get("allow_hypothesis_violation", False))
    if not allow:
        if kind == "forward":
            if F.slope_lo is not None and F.slope_lo < -1.0:
                raise SpecError(f"forward problem needs F2 >= -1 (jump slope {F.slope_lo})")
            if not psi.monotone_nonincreasing:
                raise SpecError("forward problem needs a non-increasing psi")
        if kind == "backward" and (F.slope_hi is None or F.slope_hi >= 1.0):
            raise SpecError("backward problem needs F2 < 1")
        if kind == "skorohod":
            from .skorohod import check_h3_skorohod

            msg = check_h3_skorohod(f, F, psi)
            if msg:
                raise SpecError(msg)
    return Problem(kind, f, F, psi, tol, ode_step, quad_step, lc, float(spec.get("x", 0.0)),
                   str(spec.get("name", "")), dict(mc))


def load_spec(path) -> Problem:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise SpecError(f"cannot read spec file: {e}") from None
    return parse_spec(text)


def _lin(f1=0.0, f2=0.0, F1=0.0, F2=0.0):
    return {"linear": {"f1": f1, "f2": f2, "F1": F1, "F2": F2}}


PRESETS = {
    "trivial": {"coefficients": _lin(), "psi": {"affine": {"a": -1.0, "b": 2.0}}},
    "counterexample": {
        "coefficients": _lin(f2=1.0, F2=-2.0),
        "psi": {"affine": {"a": -1.0 / math.e, "b": 1.0}},
        "allow_hypothesis_violation": True,
    },
    "counterexample_multiple": {
        "coefficients": _lin(f2=1.0, F2=-2.0),
        "psi": {"affine": {"a": -1.0 / math.e, "b": 0.0}},
        "allow_hypothesis_violation": True,
    },
    "law": {"coefficients": _lin(1.0, 0.5, 1.0, 0.5), "psi": {"affine": {"a": -1.0, "b": 0.0}}},
    "flow_law": {"coefficients": _lin(f2=1.0, F1=1.0), "psi": {"constant": 0.0}, "x": 0.0},
    "case1": {"coefficients": _lin(f2=0.5, F2=0.5), "psi": {"constant": 1.0}},
    "case2": {"coefficients": _lin(f2=0.5, F2=0.5), "psi": {"affine": {"a": -1.0, "b": 0.0}}},
    "case3": {"coefficients": _lin(f1=1.0, F1=1.0), "psi": {"affine": {"a": -1.0, "b": 0.0}}},
    "case4": {"coefficients": _lin(f2=0.5, F2=0.5), "psi": {"affine": {"a": -0.5, "b": 2.0}}},
    "case5": {"coefficients": _lin(f2=0.5, F2=-1.0), "psi": {"affine": {"a": -1.0, "b": 1.0}}},
    "case3_continuous": {"coefficients": _lin(1.0, 0.5, 1.0, 0.0),
                         "psi": {"affine": {"a": -1.0, "b": 0.0}}},
    "nonlinear": {
        "coefficients": {
            "f": {"sine": {"amp": 0.5, "slope": 0.3, "drift": {"sin": {"amp": 0.4, "freq": 2.0}}}},
            "F": {"tanh": {"amp": 0.3, "slope": 0.2, "drift": {"poly": [0.1, 0.2]}}},
        },
        "psi": {"tanh": {"c": 0.5, "k": 0.8}},
    },
    "backward_linear": {
        "kind": "backward",
        "coefficients": _lin(0.5, -0.3, 0.4, 0.5),
        "psi": {"affine": {"a": -0.5, "b": 1.0}},
    },
    "skorohod_xfree": {
        "kind": "skorohod",
        "coefficients": {"f": {"linear": {"a": 0.5, "b": -0.4}},
                         "F": {"linear": {"a": {"poly": [0.3, 0.5]}, "b": 0.0}}},
        "psi": {"clamped": {"a": -0.5, "b": 1.0, "lo": -2.0, "hi": 2.0}},
    },
    "skorohod_linear": {
        "kind": "skorohod",
        "coefficients": _lin(0.3, -0.2, 0.4, 0.3),
        "psi": {"tanh": {"c": 0.5, "k": 0.6}},
    },
    "chaos_case5": {"coefficients": _lin(f2={"poly": [0.2, 0.6]}, F2=-1.0),
                    "psi": {"affine": {"a": -0.5, "b": 1.0}}},
    "chaos_first_order": {
        "kind": "skorohod",
        "coefficients": _lin(f1={"poly": [0.5, -0.3]}, f2=0.4, F1={"sin": {"amp": 0.7, "freq": 1.5}}),
        "psi": {"affine": {"a": -0.8, "b": 1.0}},
        "allow_hypothesis_violation": True,
    },
}


def preset(name: str, **overrides) -> Problem:
    if name not in PRESETS:
        raise SpecError(f"unknown preset {name!r}")
    return parse_spec({"preset": name, **overrides})
