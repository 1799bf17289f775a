"""Local material data sets and nearest-point queries in the energy metric.

Every data set exposes ``metric``, ``dim``, ``is_finite`` and a vectorized
``nearest_many(eps, sig) -> (y_eps, y_sig, d2, labels)`` on Voigt arrays.
``labels`` identifies the branch or point selected; finite sets use it as
the assignment that the solver's stopping rule compares.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .phase import LocalState, StateField, sq_norm_density
from .tensors import ElasticityTensor, SymMatrix


class EmptyDataSetError(ValueError):
    pass


def _as_batch(eps, sig, m):
    eps = np.asarray(eps, dtype=float).reshape(-1, m)
    sig = np.asarray(sig, dtype=float).reshape(-1, m)
    return eps, sig


@dataclass(frozen=True)
class Halfspace:
    """Constraint ``direction : eps <= bound`` (or ``>=``)."""

    direction: SymMatrix
    bound: float
    sense: str = "<="

    def __post_init__(self):
        if self.sense not in ("<=", ">="):
            raise ValueError(f"sense must be '<=' or '>=', got {self.sense!r}")

    def as_upper(self):
        """``(d, beta)`` in stress Voigt form with the constraint ``d @ eps_v <= beta``."""
        d = self.direction.stress_voigt()
        if self.sense == "<=":
            return d, float(self.bound)
        return -d, -float(self.bound)


class AffineGraphBranch:
    """The graph ``sig = C eps + offset``, optionally restricted to a halfspace of strains.

    ``metric`` defaults to ``C``.
    """

    is_finite = False

    def __init__(self, C: ElasticityTensor, offset: Optional[SymMatrix] = None,
                 halfspace: Optional[Halfspace] = None, metric: Optional[ElasticityTensor] = None):
        self.C = C
        self.offset = offset if offset is not None else SymMatrix.zeros(C.dim)
        if self.offset.dim != C.dim:
            raise ValueError("offset and stiffness dimensions differ")
        if halfspace is not None and halfspace.direction.dim != C.dim:
            raise ValueError("halfspace and stiffness dimensions differ")
        self.halfspace = halfspace
        self.metric = metric if metric is not None else C
        if self.metric.dim != C.dim:
            raise ValueError("metric and stiffness dimensions differ")
        M, Minv, D = self.metric.voigt, self.metric.compliance, C.voigt
        self._MinvD = Minv @ D
        self._hess_inv = np.linalg.inv(M + D @ Minv @ D)
        self._hess_inv = 0.5 * (self._hess_inv + self._hess_inv.T)

    @property
    def dim(self):
        return self.C.dim

    def stress_of(self, eps_v):
        return self.C.apply(eps_v) + self.offset.stress_voigt()

    def admissible(self, eps_v, tol=0.0):
        eps_v = np.atleast_2d(eps_v)
        if self.halfspace is None:
            return np.ones(eps_v.shape[0], dtype=bool)
        d, beta = self.halfspace.as_upper()
        return eps_v @ d <= beta + tol

    def project_many(self, eps, sig):
        """Closest graph strains (clamped to the halfspace), vectorized."""
        eps, sig = _as_batch(eps, sig, self.C.size)
        rhs = eps @ self.metric.voigt + (sig - self.offset.stress_voigt()) @ self._MinvD
        e = rhs @ self._hess_inv
        if self.halfspace is not None:
            d, beta = self.halfspace.as_upper()
            hd = self._hess_inv @ d
            excess = e @ d - beta
            viol = excess > 0
            if np.any(viol):
                e = e.copy()
                e[viol] -= np.outer(excess[viol] / (d @ hd), hd)
        return e

    def nearest_many(self, eps, sig):
        eps, sig = _as_batch(eps, sig, self.C.size)
        ye = self.project_many(eps, sig)
        ys = self.stress_of(ye)
        d2 = sq_norm_density(eps - ye, sig - ys, self.metric)
        return ye, ys, d2, np.zeros(len(d2), dtype=int)

    def contains(self, z: LocalState, tol=1e-10):
        eps_v, sig_v = z.voigt()
        resid = sig_v - self.stress_of(eps_v)
        scale = 1.0 + np.abs(eps_v).max() + np.abs(sig_v).max()
        return bool(np.abs(resid).max() <= tol * scale and self.admissible(eps_v, tol * scale)[0])


def linear_graph(C: ElasticityTensor, metric=None) -> AffineGraphBranch:
    """The linear-elastic data set ``sig = C eps``."""
    return AffineGraphBranch(C, metric=metric)


def project_to_affine_graph(z: LocalState, branch: AffineGraphBranch) -> LocalState:
    eps_v, sig_v = z.voigt()
    e = branch.project_many(eps_v, sig_v)[0]
    return LocalState.from_voigt(e, branch.stress_of(e))


def _energy(C: ElasticityTensor, s: SymMatrix):
    v = s.strain_voigt()
    return 0.5 * float(v @ C.apply(v))


class TwoWellDataSet:
    """Two affine branches ``sig = C(eps - a)`` and ``sig = C(eps - b)``.

    Each strain belongs to the branch of lower energy; ``w`` raises the
    energy of the ``b`` well.
    """

    is_finite = False

    def __init__(self, C: ElasticityTensor, a: SymMatrix, b: SymMatrix, w: float = 0.0,
                 metric: Optional[ElasticityTensor] = None):
        if not (a.dim == b.dim == C.dim):
            raise ValueError("a, b and C must share a dimension")
        if a == b:
            raise ValueError("transformation strains a and b must differ")
        if not np.isfinite(w):
            raise ValueError("well height offset must be finite")
        self.C, self.a, self.b, self.w = C, a, b, float(w)
        self.metric = metric if metric is not None else C
        delta = (b - a).strain_voigt()
        direction = SymMatrix.from_stress_voigt(C.apply(delta))
        bound = _energy(C, b) - _energy(C, a) + self.w
        self.branches = (
            AffineGraphBranch(C, SymMatrix.from_stress_voigt(-C.apply(a.strain_voigt())),
                              Halfspace(direction, bound, "<="), self.metric),
            AffineGraphBranch(C, SymMatrix.from_stress_voigt(-C.apply(b.strain_voigt())),
                              Halfspace(direction, bound, ">="), self.metric),
        )

    @property
    def dim(self):
        return self.C.dim

    def nearest_many(self, eps, sig):
        ya = self.branches[0].nearest_many(eps, sig)
        yb = self.branches[1].nearest_many(eps, sig)
        pick_b = yb[2] < ya[2]
        ye = np.where(pick_b[:, None], yb[0], ya[0])
        ys = np.where(pick_b[:, None], yb[1], ya[1])
        d2 = np.where(pick_b, yb[2], ya[2])
        return ye, ys, d2, pick_b.astype(int)

    def contains(self, z: LocalState, tol=1e-10):
        return any(br.contains(z, tol) for br in self.branches)

    def centered(self):
        """``(half, shift)`` such that this set equals the equal-height set with
        wells ``-half, +half`` translated by ``shift``."""
        equal, shift = translate_unequal_wells(self)
        half = (self.b - self.a) * 0.5
        mid = (self.a + self.b) * 0.5
        return half, LocalState(shift.eps + mid, shift.sig)


def translate_unequal_wells(ds: TwoWellDataSet):
    """Reduce wells of unequal height to equal height by a translation.

    Returns ``(equalized, shift)`` with ``ds = equalized + shift`` pointwise.
    """
    delta = ds.b - ds.a
    dv = delta.strain_voigt()
    cdd = float(dv @ ds.C.apply(dv))
    if cdd <= 0:
        raise ValueError("wells coincide")
    lam = ds.w / cdd
    shift = LocalState(delta * lam, SymMatrix.from_stress_voigt(lam * ds.C.apply(dv)))
    return TwoWellDataSet(ds.C, ds.a, ds.b, 0.0, ds.metric), shift


class FlagDataSet1D:
    """The 1D relaxed two-well set: two outer half-lines joined by a parallelogram.

    ``C`` is used as the metric.
    """

    is_finite = False
    dim = 1

    def __init__(self, C: float, sigma0: float):
        if not C > 0:
            raise ValueError("C must be positive")
        if not sigma0 >= 0:
            raise ValueError("sigma0 must be nonnegative")
        self.C, self.sigma0 = float(C), float(sigma0)
        self.metric = ElasticityTensor.scalar(C)
        C, s0 = self.C, self.sigma0
        self.vertices = np.array([[-2 * s0 / C, -s0], [0.0, s0], [2 * s0 / C, s0], [0.0, -s0]])
        self._scale = np.array([np.sqrt(C / 2), 1 / np.sqrt(2 * C)])

    def _to_plane(self, eps, sig):
        return np.stack([eps, sig], axis=-1) * self._scale

    def nearest_many(self, eps, sig):
        eps = np.asarray(eps, dtype=float).reshape(-1)
        sig = np.asarray(sig, dtype=float).reshape(-1)
        p = self._to_plane(eps, sig)
        verts = self.vertices * self._scale
        cands, labels = [], []
        # outer half-lines
        for k, (start, direction) in enumerate(((verts[0], -np.array([1.0, self.C]) * self._scale),
                                                (verts[2], np.array([1.0, self.C]) * self._scale))):
            t = np.maximum((p - start) @ direction / (direction @ direction), 0.0)
            cands.append(start + t[:, None] * direction)
            labels.append(k)
        # parallelogram edges
        for k in range(4):
            a, b = verts[k], verts[(k + 1) % 4]
            ab = b - a
            den = ab @ ab
            t = np.zeros(len(p)) if den == 0 else np.clip((p - a) @ ab / den, 0.0, 1.0)
            cands.append(a + t[:, None] * ab)
            labels.append(2)
        cands = np.stack(cands)  # (k, n, 2)
        d2 = ((cands - p[None]) ** 2).sum(-1)
        inside = self._inside(p, verts)
        d2[:, inside] = np.inf
        best = np.argmin(d2, axis=0)
        y = cands[best, np.arange(len(p))]
        y_d2 = d2[best, np.arange(len(p))]
        y[inside] = p[inside]
        y_d2[inside] = 0.0
        lab = np.array(labels)[best]
        lab[inside] = 2
        y = y / self._scale
        return y[:, :1], y[:, 1:], y_d2, lab

    @staticmethod
    def _inside(p, verts):
        inside = np.ones(len(p), dtype=bool)
        for k in range(4):
            a, b = verts[k], verts[(k + 1) % 4]
            cross = (b[0] - a[0]) * (p[:, 1] - a[1]) - (b[1] - a[1]) * (p[:, 0] - a[0])
            inside &= cross <= 0.0
        if np.allclose(verts, verts[0]):
            inside[:] = False
        return inside


class PointCloudDataSet:
    """A finite set of local states with a kd-tree over metric-embedded coordinates."""

    is_finite = True

    def __init__(self, eps, sig, metric: ElasticityTensor, provenance=None):
        eps = np.array(eps, dtype=float, ndmin=2)
        sig = np.array(sig, dtype=float, ndmin=2)
        if eps.size == 0:
            raise EmptyDataSetError("point cloud is empty")
        if eps.shape != sig.shape or eps.shape[1] != metric.size:
            raise ValueError("point arrays do not match the metric dimension")
        eps.setflags(write=False)
        sig.setflags(write=False)
        self.eps, self.sig, self.metric = eps, sig, metric
        self.provenance = dict(provenance or {})
        self._coords = self.embed(eps, sig)
        self._tree = cKDTree(self._coords)

    @classmethod
    def from_states(cls, states, metric, provenance=None):
        states = list(states)
        if not states:
            raise EmptyDataSetError("point cloud is empty")
        eps = np.array([s.eps.strain_voigt() for s in states])
        sig = np.array([s.sig.stress_voigt() for s in states])
        return cls(eps, sig, metric, provenance)

    @property
    def dim(self):
        return self.metric.dim

    def __len__(self):
        return self.eps.shape[0]

    def point(self, i) -> LocalState:
        return LocalState.from_voigt(self.eps[i], self.sig[i])

    def embed(self, eps, sig):
        return np.hstack([self.metric.strain_embedding(eps), self.metric.stress_embedding(sig)])

    def nearest_many(self, eps, sig):
        eps, sig = _as_batch(eps, sig, self.metric.size)
        q = self.embed(eps, sig)
        idx = self._query(q)
        ye, ys = self.eps[idx], self.sig[idx]
        d2 = sq_norm_density(eps - ye, sig - ys, self.metric)
        return ye, ys, d2, idx

    def _query(self, q, rtol=1e-12):
        n = len(self)
        k = min(4, n)
        while True:
            dist, idx = self._tree.query(q, k=k)
            dist = dist.reshape(len(q), k)
            idx = idx.reshape(len(q), k)
            tied = dist <= dist[:, :1] * (1 + rtol) + 1e-300
            if k == n or not np.any(tied[:, -1]):
                break
            k = min(2 * k, n)
        return np.where(tied, idx, n).min(axis=1)

    def brute_force_nearest(self, z: LocalState):
        """Linear scan with lowest-index tie-break; reference for the tree query."""
        eps_v, sig_v = z.voigt()
        d2 = sq_norm_density(self.eps - eps_v, self.sig - sig_v, self.metric)
        i = int(np.argmin(d2))
        return i, float(d2[i])


def nearest(dataset, z: LocalState):
    """Closest member of ``dataset`` to ``z``: ``(y, d2)``."""
    if z.dim != dataset.dim:
        raise ValueError(f"state dim {z.dim} does not match data set dim {dataset.dim}")
    eps_v, sig_v = z.voigt()
    ye, ys, d2, _ = dataset.nearest_many(eps_v, sig_v)
    return LocalState.from_voigt(ye[0], ys[0]), float(d2[0])


def assign(dataset, field: StateField):
    """Pointwise nearest data states: ``(y_field, d2_per_point, labels)``."""
    if field.dim != dataset.dim:
        raise ValueError(f"field dim {field.dim} does not match data set dim {dataset.dim}")
    ye, ys, d2, labels = dataset.nearest_many(field.eps, field.sig)
    return field.with_values(ye, ys), d2, labels


def field_distance_sq(field: StateField, dataset) -> float:
    _, d2, _ = assign(dataset, field)
    return float(field.weights @ d2)
