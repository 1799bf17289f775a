"""Acceptance checks, shared by the test suite and ``ddelastic selftest``."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .constraint import BoundaryData, assemble, helmholtz_orthogonality_check, solve_classical
from .datasets import linear_graph
from .mesh import bar, rect_crossed
from .phase import LocalState, field_norm
from .relaxation import (Membership, TwoWellRelaxation, flag_membership_many,
                         generate_laminate_field, laminate_mean_error, membership_relaxed_nd,
                         rank_one_decompose, reduced_1d_two_well_solve, sample_relaxed_interior,
                         sample_relaxed_set, sample_strip_U, separating_certificate, to_states)
from .sampling import SamplingSpec
from .solver import SolverConfig, convergence_study, multistart, solve_data_driven
from .tensors import ElasticityTensor, SymMatrix


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    traces: List[list] = field(default_factory=list, repr=False)

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number}. {self.name}: {self.detail}"


def bar_space(C=2.0, n=20, eps_bar=0.5):
    m = bar(1.0, n)
    Ct = ElasticityTensor.scalar(C)
    return assemble(m, Ct, BoundaryData.build(m, [("left", 0, 0.0), ("right", 0, eps_bar)]))


def rect_space(n=8):
    m = rect_crossed(1.0, 1.0, n, n)
    C = ElasticityTensor.identity(2)
    return assemble(m, C, BoundaryData.build(m, [("left", [0, 1], 0.0)], [("right", [1.0, 0.0])]))


def _random_wells(rng, dim):
    C = ElasticityTensor.random(dim, rng)
    a = rng.normal(size=(dim, dim))
    return C, SymMatrix.from_matrix(a + a.T)


def criterion_1():
    traces, worst_err, worst_d2 = [], 0.0, 0.0
    for space in (bar_space(), rect_space()):
        classical = solve_classical(space)
        for init in ("classical", "zero", "random"):
            res = solve_data_driven(space, linear_graph(space.C), SolverConfig(init=init))
            traces.append(res.trace)
            worst_err = max(worst_err, field_norm(res.z - classical) / field_norm(classical))
            worst_d2 = max(worst_d2, res.d2)
    ok = worst_err <= 1e-10 and worst_d2 < 1e-18
    return CriterionResult(1, "classical recovery", ok,
                           f"max rel. error {worst_err:.2e}, max d2 {worst_d2:.2e}", traces)


def convergence_box(space_C=2.0, rho0=0.2, center=0.5):
    """Strain box that puts ``center`` a third of a grid cell from the nearest
    sample at every halving of ``rho`` (so no level samples it exactly)."""
    h0 = rho0 * np.sqrt(2.0 / (space_C + space_C))  # 1D graph sigma = C eps, metric C
    return ((center - (7 + 1 / 3) * h0, center + (7 + 2 / 3) * h0),)


def criterion_2():
    space = bar_space()
    graph = linear_graph(space.C)
    box = convergence_box()
    table = convergence_study(space, graph, [SamplingSpec(r, 0.0, box) for r in
                                             (0.2, 0.1, 0.05, 0.025)])
    errs = [r["error"] for r in table.rows]
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    t = 0.05
    plateau = convergence_study(space, graph, [SamplingSpec(r, t, box, seed=1) for r in
                                               (0.1, 0.05, 0.025, 0.0125)])
    perrs = [r["error"] for r in plateau.rows]
    in_band = all(0.2 * t <= e <= 5 * t for e in perrs)
    traces = [r.trace for r in table.results + plateau.results]
    ok = decreasing and table.exponent >= 0.8 and in_band
    return CriterionResult(2, "sampling convergence", ok,
                           f"errors {[f'{e:.3g}' for e in errs]}, exponent {table.exponent:.3f}, "
                           f"plateau {[f'{e:.3g}' for e in perrs]} vs t={t}", traces)


def criterion_3():
    eps = np.array([-3, -2, -1, 0, 1, 2, 3], dtype=float)
    free = reduced_1d_two_well_solve(1.0, 1.0, eps)
    all_zero = bool(np.all(free.d2_min < 1e-12))
    fixed = reduced_1d_two_well_solve(1.0, 1.0, 0.0, sigma_bar=1.5)
    g = np.linspace(-5.0, 5.0, 101)
    E, S = np.meshgrid(g, g, indexing="ij")
    grid = reduced_1d_two_well_solve(1.0, 1.0, E.ravel(), sigma_bar=S.ravel())
    zero = grid.d2_min <= 1e-9
    inside = flag_membership_many(1.0, 1.0, E.ravel(), S.ravel(), tol=1e-9) < 2
    disagree = int(np.sum(zero != inside))
    ok = all_zero and fixed.d2_min >= 0.05 and disagree == 0
    return CriterionResult(3, "1D flag relaxation", ok,
                           f"max free d2 {free.d2_min.max():.1e}, fixed-stress d2 "
                           f"{fixed.d2_min:.4f}, grid disagreements {disagree}")


def criterion_4():
    I2 = ElasticityTensor.identity(2)
    r1 = TwoWellRelaxation.compute(I2, SymMatrix.diag(1.0, 2.0))
    r2 = TwoWellRelaxation.compute(I2, SymMatrix.diag(1.0, -1.0))
    r3 = TwoWellRelaxation.compute(I2, SymMatrix.diag(1.0, 1.0))
    ok = (abs(r1.alpha_minus - 1) <= 1e-8 and abs(r1.alpha_plus - 4) <= 1e-6
          and r2.alpha_minus <= 1e-10
          and abs(r3.alpha_minus - 1) <= 1e-8 and abs(r3.alpha_plus - 1) <= 1e-8)
    return CriterionResult(4, "alpha_minus exactness", ok,
                           f"diag(1,2): ({r1.alpha_minus:.10f}, {r1.alpha_plus:.10f}); "
                           f"diag(1,-1): {r2.alpha_minus:.1e}; diag(1,1): "
                           f"({r3.alpha_minus:.10f}, {r3.alpha_plus:.10f})")


def criterion_5(n_materials=20, per_material=10, seed=5):
    rng = np.random.default_rng(seed)
    worst, failures, count = 0.0, 0, 0
    for k in range(n_materials):
        C, b = _random_wells(rng, 2 + k % 2)
        rx = TwoWellRelaxation.compute(C, b)
        for z in to_states(*sample_relaxed_interior(rx, rng, per_material)):
            dec = rank_one_decompose(rx, z)
            worst = max(worst, *dec.residuals())
            bound = dec.bound_constant() * (np.linalg.norm(np.concatenate(z.voigt())) + 1)
            for zz in (dec.z_plus, dec.z_minus):
                if np.linalg.norm(np.concatenate(zz.voigt())) > bound:
                    failures += 1
            failures += membership_relaxed_nd(rx, dec.z_plus) is not Membership.IN_DLOC_PLUS
            failures += membership_relaxed_nd(rx, dec.z_minus) is not Membership.IN_DLOC_MINUS
            count += 1
    ok = worst < 1e-8 and failures == 0
    return CriterionResult(5, "rank-one decomposition", ok,
                           f"{count} points, max residual {worst:.1e}, failures {failures}")


def criterion_6(n_points=50, n_samples=10_000, seed=6):
    rng = np.random.default_rng(seed)
    min_f0, max_f = np.inf, -np.inf
    per = 5
    for k in range(n_points // per):
        C, b = _random_wells(rng, 2 + k % 2)
        rx = TwoWellRelaxation.compute(C, b)
        E, S = sample_relaxed_set(rx, rng, n_samples)
        for z0 in to_states(*sample_strip_U(rx, rng, per)):
            cert = separating_certificate(rx, z0.eps, z0.sig)
            min_f0 = min(min_f0, cert(z0))
            max_f = max(max_f, float(cert.evaluate_many(E, S).max()))
    ok = min_f0 > 0 and max_f <= 1e-8
    return CriterionResult(6, "separating certificate", ok,
                           f"min f(z0) {min_f0:.3g}, max f on relaxed set {max_f:.2e}")


def criterion_7(hs=(4, 8, 16)):
    mesh = bar(1.0, 64)
    C = ElasticityTensor.scalar(1.0)
    rx = TwoWellRelaxation.compute(C, SymMatrix.diag(1.0))
    ratios, failures = [], 0
    for mu in (0.0, 0.5, -0.5):
        z = LocalState.from_voigt([mu + 0.3], [0.3])
        dec = rank_one_decompose(rx, z)
        errs = []
        for h in hs:
            fld = generate_laminate_field(mesh, dec, h)
            errs.append(laminate_mean_error(mesh, fld, z, dec.nu))
            for s in fld.states:
                if membership_relaxed_nd(rx, s) not in (Membership.IN_DLOC_PLUS,
                                                         Membership.IN_DLOC_MINUS):
                    failures += 1
        ratios += [a / b for a, b in zip(errs, errs[1:])]
    ok = min(ratios) >= 1.6 and failures == 0
    return CriterionResult(7, "laminate realizability", ok,
                           f"min decay ratio {min(ratios):.3f}, membership failures {failures}")


def criterion_8():
    vals = [helmholtz_orthogonality_check(s, n_pairs=50, seed=8)
            for s in (bar_space(), rect_space())]
    ok = max(vals) < 1e-10
    return CriterionResult(8, "discrete orthogonality", ok,
                           f"bar {vals[0]:.1e}, rectangle {vals[1]:.1e}")


def criterion_9(traces):
    worst_rise = 0.0
    runs = list(traces)
    spread = 0.0
    for space in (bar_space(), rect_space()):
        results = multistart(space, linear_graph(space.C), SolverConfig(), k=8)
        runs += [r.trace for r in results]
        for r1, r2 in itertools.combinations(results, 2):
            spread = max(spread, field_norm(r1.z - r2.z))
    for tr in runs:
        if len(tr) > 1:
            worst_rise = max(worst_rise, float(np.max(np.diff(tr))))
    ok = worst_rise <= 1e-14 and spread <= 1e-8
    return CriterionResult(9, "solver descent", ok,
                           f"{len(runs)} traces, max rise {worst_rise:.1e}, "
                           f"8-seed spread {spread:.1e}")


def run_all(report=print):
    """Run every criterion in order; returns the list of results."""
    results = []
    traces = []
    for fn in (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
               criterion_7, criterion_8):
        res = fn()
        traces += res.traces
        results.append(res)
        if report:
            report(res.line())
    res = criterion_9(traces)
    results.append(res)
    if report:
        report(res.line())
    return results
