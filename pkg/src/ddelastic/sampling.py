"""Controlled sampling of analytic data sets into point clouds.

A regular strain grid is mapped through each branch.  Adjacent grid
points are at most ``rho`` apart in the energy metric, so every exact
point in the box has a sample within ``rho / 2``.  With ``t > 0`` each
sample is then displaced by exactly ``t`` along a random direction normal
to its branch (in metric-embedded coordinates), so every sample lies
within ``t`` of the exact set.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .datasets import AffineGraphBranch, PointCloudDataSet, TwoWellDataSet

MAX_POINTS = 2_000_000


@dataclass(frozen=True)
class SamplingSpec:
    rho: float
    t: float = 0.0
    box: Sequence[Sequence[float]] = field(default_factory=lambda: ((-1.0, 1.0),))
    seed: int = 0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not self.t >= 0:
            raise ValueError(f"t must be nonnegative, got {self.t}")
        box = tuple(tuple(float(v) for v in r) for r in self.box)
        for lo_hi in box:
            if len(lo_hi) != 2 or not lo_hi[1] > lo_hi[0]:
                raise ValueError(f"degenerate box range {lo_hi}")
        object.__setattr__(self, "box", box)

    def to_dict(self):
        d = asdict(self)
        d["box"] = [list(r) for r in self.box]
        return d


def _grid(branch: AffineGraphBranch, spec: SamplingSpec):
    m = branch.C.size
    if len(spec.box) != m:
        raise ValueError(f"box has {len(spec.box)} ranges but strains have {m} components")
    M, D = branch.metric.voigt, branch.C.voigt
    lam_max = np.linalg.eigvalsh(M + D @ branch.metric.compliance @ D).max()
    h = spec.rho * np.sqrt(2.0 / (m * lam_max))
    axes = []
    for lo, hi in spec.box:
        n = max(1, int(np.ceil((hi - lo) / h - 1e-9)))
        axes.append(np.linspace(lo, hi, n + 1))
    count = int(np.prod([a.size for a in axes]))
    if count > MAX_POINTS:
        raise ValueError(f"sampling grid would hold {count} points; increase rho or shrink the box")
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=-1)


def _branch_samples(branch: AffineGraphBranch, spec: SamplingSpec, rng):
    e = _grid(branch, spec)
    if branch.halfspace is not None:
        # grid points outside the halfspace are moved onto its boundary
        e = branch.project_many(e, branch.stress_of(e))
        e = np.unique(e, axis=0)
    s = branch.stress_of(e)
    if spec.t > 0:
        e, s = _perturb(branch, e, s, spec.t, rng)
    return e, s


def _perturb(branch: AffineGraphBranch, e, s, t, rng):
    metric = branch.metric
    m = metric.size
    lower = np.linalg.cholesky(metric.voigt) / np.sqrt(2.0)
    lower_inv = np.linalg.cholesky(metric.compliance) / np.sqrt(2.0)
    # tangent of the graph in embedded coordinates (row convention x = e @ T)
    tangent = np.hstack([lower, branch.C.voigt @ lower_inv])
    normal = scipy.linalg.null_space(tangent)  # (2m, m)
    g = rng.normal(size=(len(e), normal.shape[1]))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    step = t * g @ normal.T
    de = np.linalg.solve(lower.T, step[:, :m].T).T
    ds = np.linalg.solve(lower_inv.T, step[:, m:].T).T
    return e + de, s + ds


def sample(dataset, spec: SamplingSpec) -> PointCloudDataSet:
    """Sample an affine branch or a two-well set into a point cloud.

    Deterministic for a given ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed)
    if isinstance(dataset, AffineGraphBranch):
        branches = (dataset,)
    elif isinstance(dataset, TwoWellDataSet):
        branches = dataset.branches
    else:
        raise TypeError(f"cannot sample {type(dataset).__name__}")
    parts = [_branch_samples(br, spec, rng) for br in branches]
    eps = np.vstack([p[0] for p in parts])
    sig = np.vstack([p[1] for p in parts])
    provenance = {"generator": "sample", "source": type(dataset).__name__, **spec.to_dict()}
    return PointCloudDataSet(eps, sig, dataset.metric, provenance)


def covering_radius(cloud: PointCloudDataSet, probes_eps, probes_sig):
    """Largest distance from a probe state to its nearest cloud point."""
    d2 = cloud.nearest_many(probes_eps, probes_sig)[2]
    return float(np.sqrt(d2.max()))
