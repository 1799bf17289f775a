"""Data-driven elasticity: distance-minimizing solvers and two-well relaxation."""
from .constraint import (BoundaryData, DiscreteConstraintSpace, assemble,
                         helmholtz_orthogonality_check, project_onto_E, residuals,
                         solve_classical)
from .datasets import (AffineGraphBranch, FlagDataSet1D, PointCloudDataSet, TwoWellDataSet,
                       linear_graph, nearest, translate_unequal_wells)
from .mesh import Mesh, bar, read_mesh, rect_crossed, write_mesh
from .phase import LocalState, StateField, field_norm, local_sq_distance, local_sq_norm
from .relaxation import (TwoWellRelaxation, alpha_range, c_hat, membership_flag_1d,
                         membership_relaxed_nd, rank_one_decompose, reduced_1d_two_well_solve,
                         separating_certificate)
from .sampling import SamplingSpec, sample
from .solver import (SolverConfig, SolverResult, convergence_study, distance_to_dataset,
                     solve_data_driven)
from .tensors import ElasticityTensor, SymMatrix

__all__ = [name for name in dir() if not name.startswith("_")]
