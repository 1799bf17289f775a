"""Local states, discrete state fields and the energy metric on phase space."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import ElasticityTensor, SymMatrix, dim_from_size


@dataclass(frozen=True, eq=False)
class LocalState:
    """A pointwise strain-stress pair."""

    eps: SymMatrix
    sig: SymMatrix

    def __post_init__(self):
        if self.eps.dim != self.sig.dim:
            raise ValueError(f"strain dim {self.eps.dim} != stress dim {self.sig.dim}")

    @property
    def dim(self):
        return self.eps.dim

    @classmethod
    def from_voigt(cls, eps_v, sig_v):
        return cls(SymMatrix.from_strain_voigt(eps_v), SymMatrix.from_stress_voigt(sig_v))

    @classmethod
    def from_matrices(cls, eps, sig):
        return cls(SymMatrix.from_matrix(eps), SymMatrix.from_matrix(sig))

    @classmethod
    def scalar(cls, eps, sig):
        """1D state from two numbers."""
        return cls(SymMatrix(1, [eps]), SymMatrix(1, [sig]))

    @classmethod
    def zeros(cls, dim):
        return cls(SymMatrix.zeros(dim), SymMatrix.zeros(dim))

    def voigt(self):
        """``(strain_v, stress_v)`` arrays."""
        return self.eps.strain_voigt(), self.sig.stress_voigt()

    def __add__(self, other):
        return LocalState(self.eps + other.eps, self.sig + other.sig)

    def __sub__(self, other):
        return LocalState(self.eps - other.eps, self.sig - other.sig)

    def __neg__(self):
        return LocalState(-self.eps, -self.sig)

    def __mul__(self, s):
        return LocalState(self.eps * s, self.sig * s)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, LocalState):
            return NotImplemented
        return self.eps == other.eps and self.sig == other.sig

    def __hash__(self):
        return hash((self.eps, self.sig))

    def __repr__(self):
        return f"LocalState(eps={self.eps.entries.tolist()}, sig={self.sig.entries.tolist()})"


def _check_dim(dim, C):
    if dim != C.dim:
        raise ValueError(f"state dim {dim} does not match metric dim {C.dim}")


def sq_norm_density(eps_v, sig_v, C):
    """Vectorized ``1/2 C eps.eps + 1/2 C^-1 sig.sig`` over leading axes."""
    eps_v = np.asarray(eps_v, dtype=float)
    sig_v = np.asarray(sig_v, dtype=float)
    return 0.5 * np.einsum("...i,...i->...", eps_v, C.apply(eps_v)) + 0.5 * np.einsum(
        "...i,...i->...", sig_v, C.apply_inverse(sig_v))


def local_sq_norm(z: LocalState, C: ElasticityTensor) -> float:
    _check_dim(z.dim, C)
    eps_v, sig_v = z.voigt()
    return float(sq_norm_density(eps_v, sig_v, C))


def local_sq_distance(a: LocalState, b: LocalState, C: ElasticityTensor) -> float:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return local_sq_norm(a - b, C)


class StateField:
    """Piecewise-constant strain/stress field, one state per integration point.

    Strains are held in strain Voigt form (engineering shear), stresses in
    stress Voigt form, both with shape ``(n_points, m)``.
    """

    def __init__(self, eps, sig, weights, metric: ElasticityTensor):
        eps = np.array(eps, dtype=float, ndmin=2)
        sig = np.array(sig, dtype=float, ndmin=2)
        weights = np.array(weights, dtype=float).reshape(-1)
        if eps.shape != sig.shape:
            raise ValueError(f"strain shape {eps.shape} != stress shape {sig.shape}")
        if eps.shape[0] != weights.size:
            raise ValueError(f"{eps.shape[0]} states but {weights.size} weights")
        if np.any(weights <= 0):
            raise ValueError("all weights must be positive")
        _check_dim(dim_from_size(eps.shape[1]), metric)
        for arr in (eps, sig, weights):
            arr.setflags(write=False)
        self.eps = eps
        self.sig = sig
        self.weights = weights
        self.metric = metric

    @classmethod
    def from_states(cls, states, weights, metric):
        eps = np.array([s.eps.strain_voigt() for s in states])
        sig = np.array([s.sig.stress_voigt() for s in states])
        return cls(eps, sig, weights, metric)

    @classmethod
    def zeros(cls, weights, metric):
        n = len(weights)
        return cls(np.zeros((n, metric.size)), np.zeros((n, metric.size)), weights, metric)

    @property
    def dim(self):
        return self.metric.dim

    def __len__(self):
        return self.weights.size

    def state(self, i) -> LocalState:
        return LocalState.from_voigt(self.eps[i], self.sig[i])

    @property
    def states(self):
        return [self.state(i) for i in range(len(self))]

    def with_values(self, eps, sig):
        return StateField(eps, sig, self.weights, self.metric)

    def _compatible(self, other):
        if len(other) != len(self) or not np.array_equal(other.weights, self.weights):
            raise ValueError("fields live on different integration points")

    def __add__(self, other):
        self._compatible(other)
        return self.with_values(self.eps + other.eps, self.sig + other.sig)

    def __sub__(self, other):
        self._compatible(other)
        return self.with_values(self.eps - other.eps, self.sig - other.sig)

    def __mul__(self, s):
        return self.with_values(self.eps * s, self.sig * s)

    __rmul__ = __mul__

    def __repr__(self):
        return f"StateField(n={len(self)}, dim={self.dim})"


def field_sq_norm(field: StateField) -> float:
    return float(field.weights @ sq_norm_density(field.eps, field.sig, field.metric))


def field_sq_distance(a: StateField, b: StateField) -> float:
    return field_sq_norm(a - b)


def field_norm(field: StateField) -> float:
    return float(np.sqrt(field_sq_norm(field)))


def norm_equivalence_constants(C: ElasticityTensor):
    """``(c1, c2)`` with ``c1 |z|_L2 <= |z|_C <= c2 |z|_L2`` for packed-Euclidean L2.

    The L2 reference norm here is the Euclidean norm of the concatenated
    ``(strain_v, stress_v)`` vectors.
    """
    lam = C.eigvals()
    lo = min(lam.min(), 1.0 / lam.max())
    hi = max(lam.max(), 1.0 / lam.min())
    return float(np.sqrt(0.5 * lo)), float(np.sqrt(0.5 * hi))
