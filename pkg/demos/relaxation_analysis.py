"""Relaxed two-well set in 2D: alpha range, membership and a laminate.

Run with ``python3 demos/relaxation_analysis.py``.
"""
import numpy as np

from ddelastic import (ElasticityTensor, LocalState, SymMatrix, TwoWellRelaxation,
                       membership_relaxed_nd, rank_one_decompose, rect_crossed)
from ddelastic.relaxation import (generate_laminate_field, laminate_mean_error,
                                  sample_relaxed_set, to_states)

C = ElasticityTensor(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]]))
b = SymMatrix.diag(1.0, 2.0)
rx = TwoWellRelaxation.compute(C, b)
print(f"alpha range [{rx.alpha_minus:.6f}, {rx.alpha_plus:.6f}]  compatible={rx.compatible}")

rng = np.random.default_rng(0)
states = to_states(*sample_relaxed_set(rx, rng, 200))
labels = [membership_relaxed_nd(rx, z).value for z in states]
print({lab: labels.count(lab) for lab in sorted(set(labels))})

# the midpoint of the wells laminates with fraction 1/2, which the mesh resolves
z = LocalState(SymMatrix.diag(0.0, 0.0), SymMatrix.diag(0.0, 0.0))
dec = rank_one_decompose(rx, z)
mesh = rect_crossed(1.0, 1.0, 32, 32)
print(f"laminate normal {np.round(dec.nu, 4)}  minus fraction {dec.lam:.4f}")
for h in (2, 4, 8, 16):
    err = laminate_mean_error(mesh, generate_laminate_field(mesh, dec, h), z, dec.nu)
    print(f"  h={h:2d}  mean-state error {err:.4e}")
