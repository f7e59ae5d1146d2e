"""Monte Carlo laws of ``X_t`` and the atom plus density decomposition.

On the no-jump event the solution is the deterministic trajectory, which
puts an atom at ``Phi(0, t; x*)`` of mass ``e^{-1}`` (``e^{-t}`` for an
initial-value flow).  Everything else is stratified by the jump counts and
summarised with one kernel density per stratum.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import MultipleSolutions, NoFixedPoint, NumericalOverflow, PreconditionError
from .fields import CoefficientField
from .flow import DEFAULT_STEP, det_flow
from .montecarlo import MULTIPLE, NO_FIXED_POINT, OK, flow_batch, sample_paths, solve_bvp_batch
from .paths import JumpPath, as_generator, sample_conditional, sample_path

__all__ = [
    "LawEstimate",
    "estimate_law",
    "estimate_flow_law",
    "conditional_flow_samples",
    "conditional_bvp_samples",
    "check_condition_P",
    "check_carlen_pardoux",
    "ks_stratified_test",
    "ATOM_TOL",
    "POOL",
]

ATOM_TOL = 1e-7
POOL = 9  # counts above 8 share one stratum
MIN_KS = 200


def _cap(n):
    return np.minimum(n, POOL)


def _label(key) -> str:
    part = lambda v: f"{POOL - 1}+" if v >= POOL else str(int(v))
    return "|".join(part(v) for v in key)


@dataclass
class LawEstimate:
    """Samples of ``X_t`` with their strata.

    ``strata`` maps a key (a tuple of capped counts) to sample indices.
    ``conditional_kde`` holds a :class:`scipy.stats.gaussian_kde` per
    non-degenerate stratum; degenerate strata (all values within ``tol``)
    are listed in ``degenerate`` and get no density.
    """

    t: float
    n_paths: int
    atom_location: float
    atom_mass_hat: float
    ecdf: np.ndarray
    conditional_kde: dict
    values: np.ndarray
    counts: np.ndarray
    is_atom: np.ndarray
    strata: dict
    degenerate: list
    tol: float = ATOM_TOL
    kind: str = "bvp"
    meta: dict = field(default_factory=dict)

    @property
    def continuous_fraction(self) -> float:
        return 1.0 - self.atom_mass_hat

    def stratum_samples(self, key) -> np.ndarray:
        return self.values[self.strata.get(tuple(key), np.empty(0, int))]

    def stratum_table(self) -> list:
        rows = []
        for key in sorted(self.strata):
            idx = self.strata[key]
            v = self.values[idx]
            rows.append({
                "stratum": _label(key),
                "count": int(len(idx)),
                "fraction": len(idx) / self.n_paths,
                "atom_count": int(self.is_atom[idx].sum()),
                "mean": float(v.mean()),
                "std": float(v.std()),
                "degenerate": key in self.degenerate,
            })
        return rows

    def summary(self) -> dict:
        return {
            "t": self.t,
            "n_paths": self.n_paths,
            "atom_location": self.atom_location,
            "atom_mass_hat": self.atom_mass_hat,
            "continuous_fraction": self.continuous_fraction,
            "strata": self.stratum_table(),
            **self.meta,
        }

    def to_csv(self) -> str:
        """One row per sample: ``path_id, N_t, N1, X_t, is_atom``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["path_id", "N_t", "N1", "X_t", "is_atom"])
        nt, n1 = self.counts[:, 0], self.counts[:, 1]
        for i in range(self.n_paths):
            w.writerow([i, int(nt[i]), int(n1[i]), repr(float(self.values[i])), int(self.is_atom[i])])
        return buf.getvalue()


def _build(values, counts, keys, atom, t, tol, bw, kind, meta) -> LawEstimate:
    values = np.asarray(values, float)
    n = len(values)
    is_atom = np.abs(values - atom) <= tol
    strata = {}
    if n:
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        for k, key in enumerate(uniq):
            strata[tuple(int(v) for v in key)] = np.flatnonzero(inv == k)
    kde, degenerate = {}, []
    for key, idx in strata.items():
        v = values[idx[~is_atom[idx]]]
        if len(v) < 2 or np.ptp(v) <= tol:
            degenerate.append(key)
            continue
        kde[key] = stats.gaussian_kde(v, bw_method=bw)
    mass = float(is_atom.mean()) if n else 0.0
    return LawEstimate(t, n, float(atom), mass, np.sort(values), kde, values, counts, is_atom,
                       strata, degenerate, tol, kind, meta)


def _paths(n_paths, seed, rng):
    if rng is not None and isinstance(rng, np.random.Generator):
        return [sample_path(rng) for _ in range(n_paths)]
    return sample_paths(int(seed if rng is None else rng), n_paths)


def _raise_status(status):
    bad = status != OK
    if not bad.any():
        return
    first = int(status[np.argmax(bad)])
    n = int(bad.sum())
    if first == NO_FIXED_POINT:
        raise NoFixedPoint(f"{n} paths have no fixed point")
    if first == MULTIPLE:
        raise MultipleSolutions(f"{n} paths have a degenerate boundary relation")
    raise NumericalOverflow(f"{n} paths overflowed")


def _solve_values(problem, paths, t, xstar, workers):
    if problem.kind == "skorohod":
        vals = np.array([problem.solve(p)(t) for p in paths])
        return vals
    res = solve_bvp_batch(problem.drift.eval, problem.batch_jump(), problem.psi.eval, paths,
                          queries=(t,), x_start=xstar, tol=problem.tol, ode_step=problem.ode_step,
                          workers=workers)
    _raise_status(res.status)
    return res.values[:, 0]


def estimate_law(problem, t: float, n_paths: int, seed: int = 0, rng=None, tol: float = ATOM_TOL,
                 workers: int = 1, bw="silverman") -> LawEstimate:
    """Law of ``X_t`` for a boundary problem from ``n_paths`` independent paths.

    ``rng`` may be an int seed (per-path streams, independent of
    ``workers``) or a :class:`numpy.random.Generator` (sequential draws).
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    paths = _paths(n_paths, seed, rng)
    xstar = problem.xstar()
    atom = det_flow(problem.drift, 0.0, t, xstar, problem.ode_step)
    values = _solve_values(problem, paths, t, xstar, workers)
    nt = np.array([p.count(0.0, t) for p in paths], dtype=np.int64)
    n1 = np.array([len(p) for p in paths], dtype=np.int64)
    keys = np.stack([_cap(nt), _cap(n1 - nt)], axis=1) if n_paths else np.empty((0, 2), int)
    counts = np.stack([nt, n1], axis=1) if n_paths else np.empty((0, 2), int)
    return _build(values, counts, keys, atom, t, tol, bw, "bvp",
                  {"xstar": xstar, "expected_atom_mass": math.exp(-1.0)})


def estimate_flow_law(f: CoefficientField, F: CoefficientField, x: float, t: float, n_paths: int,
                      seed: int = 0, rng=None, tol: float = ATOM_TOL, workers: int = 1,
                      ode_step: float = DEFAULT_STEP, bw="silverman") -> LawEstimate:
    """Law of the initial-value flow ``phi_t(x)``; atom at ``Phi(0, t; x)`` of mass ``e^{-t}``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    paths = _paths(n_paths, seed, rng)
    Fe = F.eval
    res = flow_batch(f.eval, lambda r, y: y + Fe(r, y), paths, x, queries=(t,), ode_step=ode_step,
                     workers=workers)
    _raise_status(res.status)
    values = res.values[:, 0]
    nt = np.array([p.count(0.0, t) for p in paths], dtype=np.int64)
    n1 = np.array([len(p) for p in paths], dtype=np.int64)
    atom = det_flow(f, 0.0, t, x, ode_step)
    keys = _cap(nt)[:, None] if n_paths else np.empty((0, 1), int)
    counts = np.stack([nt, n1], axis=1) if n_paths else np.empty((0, 2), int)
    return _build(values, counts, keys, atom, t, tol, bw, "flow", {"expected_atom_mass": math.exp(-t)})


# conditional reference samplers --------------------------------------------------


def conditional_flow_samples(f: CoefficientField, F: CoefficientField, x: float, t: float, n: int,
                             size: int, rng, ode_step: float = DEFAULT_STEP) -> np.ndarray:
    """``phi_t(x)`` given ``N_t = n``: jump times are uniform order statistics on ``(0, t]``."""
    gen = as_generator(rng)
    paths = [sample_conditional(gen, n, t) for _ in range(size)]
    Fe = F.eval
    res = flow_batch(f.eval, lambda r, y: y + Fe(r, y), paths, x, queries=(t,), ode_step=ode_step)
    return res.values[:, 0]


def conditional_bvp_samples(problem, t: float, key, size: int, rng) -> np.ndarray:
    """``X_t`` given ``N_t = a`` and ``N_1 - N_t = b`` for ``key = (a, b)``."""
    a, b = int(key[0]), int(key[1])
    if a >= POOL or b >= POOL:
        raise ValueError("the pooled stratum has no conditional sampler")
    gen = as_generator(rng)
    paths = []
    for _ in range(size):
        left = sample_conditional(gen, a, t).times if a else ()
        right = tuple(t + s for s in sample_conditional(gen, b, 1.0 - t).times) if b else ()
        paths.append(JumpPath(left + right))
    xstar = problem.xstar()
    return _solve_values(problem, paths, t, xstar, 1)


def ks_stratified_test(estimate: LawEstimate, reference, alpha: float = 0.05,
                       min_size: int = MIN_KS) -> dict:
    """Two-sample KS per stratum against ``reference``.

    ``reference`` is another :class:`LawEstimate` or a callable
    ``(key, size) -> samples``.  Strata that are degenerate, pooled, or
    smaller than ``min_size`` on either side are reported as skipped.
    """
    out = {}
    for key in sorted(estimate.strata):
        label = _label(key)
        v = estimate.stratum_samples(key)
        if key in estimate.degenerate:
            out[label] = {"skipped": "degenerate stratum", "n": int(len(v))}
            continue
        if any(k >= POOL for k in key):
            out[label] = {"skipped": "pooled stratum", "n": int(len(v))}
            continue
        if len(v) < min_size:
            out[label] = {"skipped": f"fewer than {min_size} samples", "n": int(len(v))}
            continue
        if isinstance(reference, LawEstimate):
            r = reference.stratum_samples(key)
        else:
            r = np.asarray(reference(key, len(v)), float)
        if len(r) < min_size:
            out[label] = {"skipped": f"reference has fewer than {min_size} samples", "n": int(len(v))}
            continue
        p = float(stats.ks_2samp(v, r).pvalue)
        out[label] = {"p": p, "n": int(len(v)), "n_ref": int(len(r)), "reject": p < alpha}
    return out


# sufficient conditions ------------------------------------------------------------


def _grid(t_grid, x_grid):
    t_grid = np.linspace(0.0, 1.0, 21) if t_grid is None else np.asarray(t_grid, float)
    x_grid = np.linspace(-5.0, 5.0, 201) if x_grid is None else np.asarray(x_grid, float)
    return np.meshgrid(t_grid, x_grid, indexing="ij")


def check_condition_P(f: CoefficientField, F: CoefficientField, t_grid=None, x_grid=None,
                      margin: float = 0.0) -> dict:
    """Grid scan of ``|f(t, x+F) - f(t, x)(1 + d2F) - d1F|``; passes if its minimum exceeds ``margin``."""
    F.require("d1", "d2")
    T, X = _grid(t_grid, x_grid)
    e = np.abs(f.eval(T, X + F.eval(T, X)) - f.eval(T, X) * (1.0 + F.d2(T, X)) - F.d1(T, X))
    e = np.broadcast_to(e, T.shape)
    i = np.unravel_index(int(np.argmin(e)), e.shape)
    m = float(e[i])
    return {"ok": m > margin, "min": m, "argmin": (float(T[i]), float(X[i])), "margin": margin}


def check_carlen_pardoux(f: CoefficientField, F: CoefficientField, x_grid=None) -> dict:
    """``|f'F - fF'| > 1/2 sup|f''| sup|F|^2`` on a grid, for autonomous ``f`` and ``F``.

    Passing implies condition P (``f(x+F) - f(x)(1+F') = f'F - fF' + R``
    with ``|R| <= 1/2 sup|f''| F^2``).
    """
    if not (f.autonomous and F.autonomous):
        raise PreconditionError("the Carlen-Pardoux condition is stated for time-independent f and F")
    f.require("d2", "d22")
    F.require("d2")
    x = np.linspace(-5.0, 5.0, 2001) if x_grid is None else np.asarray(x_grid, float)
    z = np.zeros_like(x)
    fx, fp, fpp = f.eval(z, x) + z, f.d2(z, x) + z, f.d22(z, x) + z
    Fx, Fp = F.eval(z, x) + z, F.d2(z, x) + z
    lhs = np.abs(fp * Fx - fx * Fp)
    rhs = 0.5 * float(np.max(np.abs(fpp))) * float(np.max(np.abs(Fx))) ** 2
    i = int(np.argmin(lhs - rhs))
    ok = bool(np.all(lhs > rhs))
    return {"ok": ok, "implies_condition_P": ok, "min_lhs": float(lhs[i]), "rhs": rhs,
            "argmin": float(x[i])}
