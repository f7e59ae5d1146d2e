"""Command-line front end.

Exit codes: 0 success, 1 bad input or failed precondition, 2 no fixed
point, 3 multiple solutions, 4 missing capability, 5 statistical
rejection or failed comparison.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import (CapabilityError, MultipleSolutions, NoFixedPoint, PoissonBVPError,
                     PreconditionError)
from .paths import JumpPath, Rng, sample_path

EXIT_OK, EXIT_INPUT, EXIT_NOFP, EXIT_MULTI, EXIT_CAP, EXIT_REJECT = 0, 1, 2, 3, 4, 5


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default)


def _problem(args, fallback=None):
    from .problems import SpecError, load_spec, preset

    if args.spec:
        return load_spec(args.spec)
    name = args.preset or fallback
    if not name:
        raise SpecError("give --spec FILE or --preset NAME")
    return preset(name)


def _path(args) -> JumpPath:
    if args.path is not None:
        try:
            return JumpPath.from_json(args.path)
        except (ValueError, TypeError, json.JSONDecodeError) as e:
            raise ValueError(f"--path: {e}") from None
    return sample_path(Rng(args.seed, 0))


def _write(out, name, text):
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / name).write_text(text)


def _mc(args, problem, key, default):
    v = getattr(args, key)
    if v is not None:
        return v
    return problem.mc.get({"paths": "n_paths"}.get(key, key), default)


# commands ------------------------------------------------------------------------


def _solve_one(args, problem) -> int:
    print(problem.solve(_path(args)).to_json())
    return EXIT_OK


def cmd_solve(args) -> int:
    return _solve_one(args, _problem(args))


def cmd_skorohod(args) -> int:
    problem = _problem(args, "skorohod_linear")
    if problem.kind != "skorohod":
        raise ValueError("the skorohod command needs a spec with kind 'skorohod'")
    return _solve_one(args, problem)


def cmd_law(args) -> int:
    from .law import estimate_law

    problem = _problem(args)
    t = 1.0 if args.t is None else args.t
    est = estimate_law(problem, t, _mc(args, problem, "paths", 10_000), seed=_mc(args, problem, "seed", 0),
                       workers=_mc(args, problem, "workers", 1))
    summary = dumps(est.summary())
    if args.out:
        _write(args.out, "law_summary.json", summary + "\n")
        _write(args.out, "law_samples.csv", est.to_csv())
    print(summary)
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    from .montecarlo import sample_paths
    from .sensitivity import rows_to_csv, sensitivity_rows

    problem = _problem(args)
    if problem.kind != "forward":
        raise PreconditionError("jump-time sensitivities are implemented for forward problems")
    for fld, names in ((problem.f, ("d2",)), (problem.F, ("d1", "d2"))):
        fld.require(*names)
    if problem.psi.dpsi is None:
        raise CapabilityError("psi has no derivative")
    n = _mc(args, problem, "paths", 20)
    ts = (0.0, 0.5, 1.0) if args.t is None else (0.0, args.t, 1.0)
    rows = sensitivity_rows(problem, sample_paths(_mc(args, problem, "seed", 0), n), ts)
    text = rows_to_csv(rows)
    summary = {"n_paths": n, "n_rows": len(rows),
               "max_rel_err": max((r["rel_err"] for r in rows), default=0.0)}
    if args.out:
        _write(args.out, "sensitivity.csv", text)
        print(dumps(summary))
    else:
        sys.stdout.write(text)
        print(dumps(summary), file=sys.stderr)
    return EXIT_OK


def cmd_reciprocal(args) -> int:
    from .problems import preset
    from .reciprocal import CASE_PRESETS, reciprocal_case

    if args.spec or args.preset:
        problem = _problem(args)
    elif args.case in CASE_PRESETS:
        problem = preset(CASE_PRESETS[args.case])
    else:
        raise ValueError("give --case 1..5, --spec or --preset")
    rep = reciprocal_case(problem, _mc(args, problem, "paths", 10_000), seed=_mc(args, problem, "seed", 0),
                          alpha=args.alpha, workers=_mc(args, problem, "workers", 1))
    if args.case is not None:
        rep.meta["case"] = args.case
    text = rep.to_json()
    if args.out:
        _write(args.out, "reciprocal.json", text + "\n")
    print(text)
    return EXIT_REJECT if rep.rejected else EXIT_OK


CHAOS_TOL = 1e-8


def chaos_comparison(problem, t: float, order: int, n_omegas: int, seed: int) -> dict:
    """Pathwise solution vs the truncated chaos series at sampled points."""
    from .chaos import build_case5_chaos, build_first_order_chaos
    from .fields import TimeFunction, _neg
    from .linear import LinearCoefficients, solve_linear_bvp
    from .montecarlo import sample_paths

    lc = problem.linear
    if lc is None:
        raise CapabilityError("chaos expansions are available for linear coefficients only")
    zero = lambda tf: tf.is_constant and tf.lo == 0.0
    psi = problem.psi
    if problem.kind == "forward" and lc.F2.is_constant and lc.F2.lo == -1.0 and zero(lc.f1) and zero(lc.F1):
        series = build_case5_chaos(lc.f2, float(psi.eval(0.0)), problem.xstar(), t, order)
        pathwise = lambda om: solve_linear_bvp(lc, psi, om)(t)
        family = "case5"
    elif problem.kind == "skorohod" and zero(lc.F2) and psi.dpsi is not None:
        a = float(psi.dpsi(0.0))
        b = float(psi.eval(0.0))
        if any(abs(psi.eval(x) - (a * x + b)) > 1e-12 * (1 + abs(x)) for x in (-3.0, 1.0, 7.0)):
            raise CapabilityError("first-order chaos needs an affine psi")
        series = build_first_order_chaos(lc, a, b, t)
        conv = LinearCoefficients(TimeFunction.sum(lc.f1, _neg(lc.F1)), lc.f2, lc.F1, lc.F2)
        pathwise = lambda om: solve_linear_bvp(conv, psi, om)(t)
        family = "first_order"
    else:
        raise CapabilityError("no chaos expansion for this problem (need case 5 or an x-free "
                              "linear Skorohod problem)")
    worst, worst_tail = 0.0, 0.0
    for om in sample_paths(seed, n_omegas):
        worst = max(worst, abs(pathwise(om) - series(om)))
        worst_tail = max(worst_tail, series.tail_bound(om))
    flagged = worst_tail > CHAOS_TOL
    return {"family": family, "t": t, "order": series.truncation_order, "n_omegas": n_omegas,
            "max_abs_diff": worst, "max_tail_bound": worst_tail, "truncation_flagged": flagged,
            "pass": worst < CHAOS_TOL and not flagged, "tolerance": CHAOS_TOL}


def cmd_chaos(args) -> int:
    from .chaos import DEFAULT_ORDER

    problem = _problem(args, "chaos_case5")
    t = 0.5 if args.t is None else args.t
    order = DEFAULT_ORDER if args.order is None else args.order
    rep = chaos_comparison(problem, t, order, args.omegas, _mc(args, problem, "seed", 0))
    text = dumps(rep)
    if args.out:
        _write(args.out, "chaos.json", text + "\n")
    print(text)
    return EXIT_OK if rep["pass"] else EXIT_REJECT


# parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="poisson-bvp",
                                description="Boundary-value problems for Poisson-driven SDEs")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--spec", metavar="FILE", help="JSON problem specification")
        sp.add_argument("--preset", metavar="NAME", help="named built-in problem")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--paths", type=int, default=None, help="number of Monte Carlo paths")
        sp.add_argument("--t", type=float, default=None)
        sp.add_argument("--order", type=int, default=None)
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--out", metavar="DIR", default=None)
        return sp

    for name, fn, helptext in (
        ("solve", cmd_solve, "solve one path and print the trajectory"),
        ("skorohod", cmd_skorohod, "solve a Skorohod problem at one canonical point"),
    ):
        sp = common(sub.add_parser(name, help=helptext))
        sp.add_argument("--path", metavar="JSON", help="jump times, e.g. '[0.3, 0.7]'")
        sp.set_defaults(fn=fn)
    common(sub.add_parser("law", help="Monte Carlo law of X_t")).set_defaults(fn=cmd_law)
    common(sub.add_parser("sensitivity", help="jump-time derivatives vs finite differences")
           ).set_defaults(fn=cmd_sensitivity)
    sp = common(sub.add_parser("reciprocal", help="conditional-independence test"))
    sp.add_argument("--case", type=int, default=None, choices=range(1, 6))
    sp.add_argument("--alpha", type=float, default=0.01)
    sp.set_defaults(fn=cmd_reciprocal)
    sp = common(sub.add_parser("chaos", help="chaos series vs pathwise solution"))
    sp.add_argument("--omegas", type=int, default=1000, help="number of sampled points")
    sp.set_defaults(fn=cmd_chaos)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is None and args.command in ("solve", "skorohod"):
        args.seed = 0
    try:
        return args.fn(args)
    except NoFixedPoint as e:
        print(f"error: no fixed point: {e}", file=sys.stderr)
        return EXIT_NOFP
    except MultipleSolutions as e:
        print(f"error: multiple solutions: {e}", file=sys.stderr)
        return EXIT_MULTI
    except CapabilityError as e:
        print(f"error: missing capability: {e}", file=sys.stderr)
        return EXIT_CAP
    except (PoissonBVPError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
