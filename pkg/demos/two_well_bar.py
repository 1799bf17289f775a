"""Two-well bar: single start versus multistart, compared with the reduced solver.

Run with ``python3 demos/two_well_bar.py``.
"""
from ddelastic import (BoundaryData, ElasticityTensor, SolverConfig, SymMatrix, TwoWellDataSet,
                       assemble, bar, reduced_1d_two_well_solve, solve_data_driven)
from ddelastic.solver import multistart

C = ElasticityTensor.scalar(1.0)
wells = TwoWellDataSet(C, SymMatrix.diag(-1.0), SymMatrix.diag(1.0))
mesh = bar(1.0, 40)

for eps_bar in (0.0, 0.3, 0.7):
    space = assemble(mesh, C, BoundaryData.build(mesh, [("left", 0, 0.0), ("right", 0, eps_bar)]))
    single = solve_data_driven(space, wells, SolverConfig(init="classical"))
    best = min(multistart(space, wells, SolverConfig(), k=8), key=lambda r: r.d2)
    ref = reduced_1d_two_well_solve(1.0, 1.0, eps_bar).item()
    print(f"eps_bar={eps_bar:.2f}  single d2={single.d2:.3e}  multistart d2={best.d2:.3e}  "
          f"reduced d2={ref.d2_min:.3e}")
