"""Data-driven solver: alternate nearest-data assignment and projection onto E.

Each half-step minimizes ``||y - z||^2`` over one block, so the recorded
squared distances never increase.
"""
from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .constraint import DiscreteConstraintSpace, project_onto_E, solve_classical
from .datasets import AffineGraphBranch, EmptyDataSetError, assign
from .dataio import fmt, state_header, states_to_rows, write_csv
from .phase import StateField, field_norm, field_sq_distance
from .sampling import SamplingSpec, sample


class Init(str, enum.Enum):
    CLASSICAL = "classical"
    ZERO = "zero"
    RANDOM = "random"


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the fixed-point iteration.

    ``tol`` bounds the relative change of ``d2`` between iterations; ``atol``
    stops once ``d2`` falls below ``atol`` times the squared size of the
    initial iterate. ``n_starts > 1`` adds seeded random-assignment starts.
    """

    max_iters: int = 500
    tol: float = 1e-12
    atol: float = 1e-26
    init: Init = Init.CLASSICAL
    seed: int = 0
    n_starts: int = 1

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.atol >= 0:
            raise ValueError("atol must be nonnegative")
        if int(self.n_starts) < 1:
            raise ValueError("n_starts must be at least 1")
        object.__setattr__(self, "init", Init(self.init))

    def to_dict(self):
        return {"max_iters": self.max_iters, "tol": self.tol, "atol": self.atol,
                "init": self.init.value, "seed": self.seed, "n_starts": self.n_starts}


@dataclass
class SolverResult:
    z: StateField
    y: StateField
    d2: float
    iterations: int
    trace: List[float]
    converged: bool
    labels: np.ndarray = field(repr=False, default=None)
    seed: int = 0

    def summary(self):
        return {"d2": self.d2, "iterations": self.iterations, "converged": self.converged,
                "trace": list(self.trace), "seed": self.seed}


def _check(space: DiscreteConstraintSpace, dataset):
    if dataset.dim != space.dim:
        raise ValueError(f"data set dim {dataset.dim} does not match space dim {space.dim}")
    if dataset.metric != space.C:
        raise ValueError("data set metric must equal the stiffness used by the constraint space")
    if getattr(dataset, "is_finite", False) and len(dataset) == 0:
        raise EmptyDataSetError("data set is empty")


def _initial(space, dataset, init: Init, rng):
    if init is Init.CLASSICAL:
        return solve_classical(space)
    if init is Init.ZERO:
        return project_onto_E(space, space.field(np.zeros((space.n_points, space.m)),
                                                 np.zeros((space.n_points, space.m))))
    if dataset.is_finite:
        idx = rng.integers(len(dataset), size=space.n_points)
        y = space.field(dataset.eps[idx], dataset.sig[idx])
    else:
        ref = solve_classical(space)
        scale = 1.0 + max(np.abs(ref.eps).max(), np.abs(ref.sig).max())
        shape = (space.n_points, space.m)
        y, _, _ = assign(dataset, space.field(scale * rng.normal(size=shape),
                                              scale * rng.normal(size=shape)))
    return project_onto_E(space, y)


def _solve_once(space, dataset, cfg: SolverConfig, init: Init, seed: int) -> SolverResult:
    rng = np.random.default_rng(seed)
    z = _initial(space, dataset, init, rng)
    y, local, labels = assign(dataset, z)
    floor = cfg.atol * max(field_norm(z) ** 2, field_norm(y) ** 2, 1.0)
    trace: List[float] = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        z = project_onto_E(space, y)
        d2 = field_sq_distance(y, z)
        trace.append(d2)
        y_new, local, new_labels = assign(dataset, z)
        repeated = dataset.is_finite and np.array_equal(new_labels, labels)
        y, labels = y_new, new_labels
        if repeated or d2 <= floor:
            converged = True
            break
        # no relative progress (round-off can make the change slightly negative)
        if len(trace) > 1 and trace[-2] - d2 <= cfg.tol * trace[-2]:
            converged = True
            break
    d2 = float(z.weights @ local)
    return SolverResult(z, y, d2, it, trace, converged, labels, seed)


def solve_data_driven(space: DiscreteConstraintSpace, dataset, cfg: SolverConfig = SolverConfig(),
                      threads: int = 1) -> SolverResult:
    """Minimize the distance between the constraint set and ``dataset``.

    Returns the best of ``cfg.n_starts`` runs (lowest ``d2``, then lowest
    start index). Start 0 uses ``cfg.init``; further starts use random
    assignments seeded with ``cfg.seed + k``.
    """
    _check(space, dataset)
    starts = [(cfg.init, cfg.seed)] + [(Init.RANDOM, cfg.seed + k) for k in range(1, cfg.n_starts)]
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda s: _solve_once(space, dataset, cfg, *s), starts))
    else:
        results = [_solve_once(space, dataset, cfg, *s) for s in starts]
    return min(enumerate(results), key=lambda kr: (kr[1].d2, kr[0]))[1]


def multistart(space, dataset, cfg: SolverConfig = SolverConfig(), k: int = 8, threads: int = 1):
    """All ``k`` seeded random-start results (seeds ``cfg.seed .. cfg.seed + k - 1``)."""
    _check(space, dataset)
    seeds = [cfg.seed + i for i in range(k)]
    run = lambda s: _solve_once(space, dataset, cfg, Init.RANDOM, s)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, seeds))
    return [run(s) for s in seeds]


def _is_nominal_linear_graph(space, dataset):
    return (isinstance(dataset, AffineGraphBranch) and dataset.halfspace is None
            and dataset.C == space.C and not np.any(dataset.offset.stress_voigt()))


def distance_to_dataset(space, dataset, cfg: SolverConfig = SolverConfig()):
    """``(d2_min, z)``; closed form for the nominal linear graph, else a DD solve."""
    _check(space, dataset)
    if _is_nominal_linear_graph(space, dataset):
        z = solve_classical(space)
        _, local, _ = assign(dataset, z)
        return float(z.weights @ local), z
    res = solve_data_driven(space, dataset, cfg)
    return res.d2, res.z


def limit_solution(space, exact_set, cfg: SolverConfig = SolverConfig()):
    if _is_nominal_linear_graph(space, exact_set):
        return solve_classical(space)
    return solve_data_driven(space, exact_set, cfg).z


@dataclass
class ConvergenceTable:
    rows: List[dict]
    exponent: float
    results: List[SolverResult] = field(repr=False, default_factory=list)

    def write_csv(self, path):
        write_csv(path, ["rho", "t", "d2", "error"],
                  [[r["rho"], r["t"], r["d2"], r["error"]] for r in self.rows])


def fit_exponent(rho, err):
    """Least-squares slope of ``log(err)`` against ``log(rho)``; nan if undetermined."""
    rho, err = np.asarray(rho, float), np.asarray(err, float)
    ok = (rho > 0) & (err > 0)
    if ok.sum() < 2 or np.unique(rho[ok]).size < 2:
        return float("nan")
    return float(np.polyfit(np.log(rho[ok]), np.log(err[ok]), 1)[0])


def convergence_study(space, exact_set, specs: Sequence[SamplingSpec],
                      cfg: SolverConfig = SolverConfig(), limit=None) -> ConvergenceTable:
    """One DD solve per sampled cloud; error is the energy distance to the limit solution."""
    specs = list(specs)
    for s0, s1 in zip(specs, specs[1:]):
        if s1.rho > s0.rho or s1.t > s0.t:
            raise ValueError("sampling specs must be ordered by decreasing rho and t")
    z_lim = limit if limit is not None else limit_solution(space, exact_set, cfg)
    rows, results = [], []
    for spec in specs:
        res = solve_data_driven(space, sample(exact_set, spec), cfg)
        rows.append({"rho": spec.rho, "t": spec.t, "d2": res.d2,
                     "error": field_norm(res.z - z_lim)})
        results.append(res)
    zero_t = [r for r in rows if r["t"] == 0]
    exponent = fit_exponent([r["rho"] for r in zero_t], [r["error"] for r in zero_t])
    return ConvergenceTable(rows, exponent, results)


def transversality_diagnostic(space, dataset, n_pairs=400, seed=0):
    """Fit ``||y - z|| >= c (||y|| + ||z||) - b`` on half of random pairs, check the rest.

    ``y`` are random fields of data states, ``z`` random fields of the
    constraint set, drawn over several orders of magnitude. Returns a dict
    with ``c``, ``b`` and the largest margin ``c s - b - g`` on the
    validation half (positive means a violation).
    """
    _check(space, dataset)
    rng = np.random.default_rng(seed)
    shape = (space.n_points, space.m)
    gap, size = np.empty(n_pairs), np.empty(n_pairs)
    for k in range(n_pairs):
        scale = 10.0 ** rng.uniform(-2, 3)
        y, _, _ = assign(dataset, space.field(scale * rng.normal(size=shape),
                                              scale * rng.normal(size=shape)))
        z = project_onto_E(space, space.field(scale * rng.normal(size=shape),
                                              scale * rng.normal(size=shape)))
        gap[k] = field_norm(y - z)
        size[k] = field_norm(y) + field_norm(z)
    fit = np.arange(n_pairs) % 2 == 0
    big = fit & (size >= np.median(size[fit]))
    c = 0.5 * float(np.min(gap[big] / size[big]))
    b = max(0.0, float(np.max(c * size[fit] - gap[fit])))
    margin = c * size[~fit] - b - gap[~fit]
    return {"c": c, "b": b, "max_margin": float(margin.max()),
            "violations": int(np.sum(margin > 0)), "n_pairs": n_pairs}


def write_fields(result: SolverResult, z_path, y_path):
    for path, fld in ((z_path, result.z), (y_path, result.y)):
        rows = states_to_rows(fld.eps, fld.sig)
        write_csv(path, ["element"] + state_header(fld.dim),
                  [[i] + [fmt(v) for v in row] for i, row in enumerate(rows)])
