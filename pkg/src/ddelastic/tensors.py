"""Symmetric tensors, Voigt packing and the nominal elasticity tensor.

Packing order is ``(11,)`` in 1D, ``(11, 22, 12)`` in 2D and
``(11, 22, 33, 23, 13, 12)`` in 3D.  Two packed forms are used:

* *strain Voigt*: shear entries carry the engineering factor 2,
* *stress Voigt*: plain tensor components.

With this convention ``stress_v @ strain_v`` equals the full tensor
contraction and ``strain_v @ C.voigt @ strain_v`` equals ``C eps . eps``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

_PAIRS = {
    1: [(0, 0)],
    2: [(0, 0), (1, 1), (0, 1)],
    3: [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)],
}


def voigt_size(dim):
    return dim * (dim + 1) // 2


def dim_from_size(m):
    for dim in (1, 2, 3):
        if voigt_size(dim) == m:
            return dim
    raise ValueError(f"no dimension has {m} packed components")


def voigt_pairs(dim):
    try:
        return _PAIRS[dim]
    except KeyError:
        raise ValueError(f"dimension must be 1, 2 or 3, got {dim}") from None


def shear_factor(dim):
    """Engineering factor per packed entry (1 on the diagonal, 2 on shear)."""
    return np.array([1.0 if i == j else 2.0 for i, j in voigt_pairs(dim)])


def pack(mats):
    """Tensor components of symmetric matrices, shape (..., n, n) -> (..., m)."""
    mats = np.asarray(mats, dtype=float)
    dim = mats.shape[-1]
    return np.stack([mats[..., i, j] for i, j in voigt_pairs(dim)], axis=-1)


def unpack(entries):
    """Inverse of :func:`pack`; the result is symmetric by construction."""
    entries = np.asarray(entries, dtype=float)
    dim = dim_from_size(entries.shape[-1])
    out = np.zeros(entries.shape[:-1] + (dim, dim))
    for k, (i, j) in enumerate(voigt_pairs(dim)):
        out[..., i, j] = entries[..., k]
        out[..., j, i] = entries[..., k]
    return out


def matrix_to_strain_voigt(mats):
    mats = np.asarray(mats, dtype=float)
    return pack(mats) * shear_factor(mats.shape[-1])


def strain_voigt_to_matrix(v):
    v = np.asarray(v, dtype=float)
    return unpack(v / shear_factor(dim_from_size(v.shape[-1])))


def matrix_to_stress_voigt(mats):
    return pack(mats)


def stress_voigt_to_matrix(v):
    return unpack(v)


def strain_to_stress_layout(v):
    """Re-express a strain-Voigt vector with plain tensor components."""
    v = np.asarray(v, dtype=float)
    return v / shear_factor(dim_from_size(v.shape[-1]))


def stress_to_strain_layout(v):
    v = np.asarray(v, dtype=float)
    return v * shear_factor(dim_from_size(v.shape[-1]))


def sym_outer(c, nu):
    """Symmetrized tensor product ``(c_i nu_j + c_j nu_i) / 2``."""
    c = np.asarray(c, dtype=float)
    nu = np.asarray(nu, dtype=float)
    outer = c[..., :, None] * nu[..., None, :]
    return 0.5 * (outer + np.swapaxes(outer, -1, -2))


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """Symmetric ``dim x dim`` tensor stored as its packed tensor components."""

    dim: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float).reshape(-1)
        if entries.size != voigt_size(self.dim):
            raise ValueError(
                f"dim {self.dim} needs {voigt_size(self.dim)} entries, got {entries.size}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_matrix(cls, mat, atol=1e-12):
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        if mat.shape[0] != mat.shape[1]:
            raise ValueError("matrix must be square")
        scale = max(1.0, float(np.abs(mat).max(initial=0.0)))
        if not np.allclose(mat, mat.T, rtol=0.0, atol=atol * scale):
            raise ValueError("matrix is not symmetric")
        return cls(mat.shape[0], pack(0.5 * (mat + mat.T)))

    @classmethod
    def from_strain_voigt(cls, v):
        v = np.asarray(v, dtype=float).reshape(-1)
        return cls(dim_from_size(v.size), strain_to_stress_layout(v))

    @classmethod
    def from_stress_voigt(cls, v):
        v = np.asarray(v, dtype=float).reshape(-1)
        return cls(dim_from_size(v.size), v)

    @classmethod
    def zeros(cls, dim):
        return cls(dim, np.zeros(voigt_size(dim)))

    @classmethod
    def diag(cls, *values):
        return cls.from_matrix(np.diag(np.asarray(values, dtype=float)))

    def to_matrix(self):
        return unpack(self.entries)

    def strain_voigt(self):
        return self.entries * shear_factor(self.dim)

    def stress_voigt(self):
        return self.entries.copy()

    def dot(self, other):
        """Full contraction ``A : B``."""
        self._check(other)
        return float(self.stress_voigt() @ other.strain_voigt())

    def norm(self):
        return float(np.sqrt(self.dot(self)))

    def _check(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SymMatrix(self.dim, self.entries + other.entries)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SymMatrix(self.dim, self.entries - other.entries)

    def __neg__(self):
        return SymMatrix(self.dim, -self.entries)

    def __mul__(self, s):
        return SymMatrix(self.dim, float(s) * self.entries)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.dim, self.entries.tobytes()))

    def __repr__(self):
        return f"SymMatrix(dim={self.dim}, entries={self.entries.tolist()})"


class ElasticityTensor:
    """Symmetric positive definite stiffness acting on packed strains.

    Parameters
    ----------
    voigt : array_like, shape (m, m)
        Stiffness in Voigt form: ``stress_v = voigt @ strain_v`` with
        engineering shear strains.
    sym_tol : float
        Relative tolerance of the major-symmetry check.
    """

    def __init__(self, voigt, sym_tol=1e-12):
        voigt = np.atleast_2d(np.array(voigt, dtype=float))
        if voigt.ndim != 2 or voigt.shape[0] != voigt.shape[1]:
            raise ValueError("Voigt stiffness must be a square matrix")
        self.dim = dim_from_size(voigt.shape[0])
        scale = np.abs(voigt).max()
        if not np.allclose(voigt, voigt.T, rtol=0.0, atol=sym_tol * max(scale, 1e-300)):
            raise ValueError("elasticity tensor lacks major symmetry")
        voigt = 0.5 * (voigt + voigt.T)
        try:
            lower = np.linalg.cholesky(voigt)
        except np.linalg.LinAlgError:
            raise ValueError("elasticity tensor is not positive definite") from None
        self.voigt = voigt
        self.voigt.setflags(write=False)
        self._chol = lower
        self.compliance = scipy.linalg.cho_solve((lower, True), np.eye(voigt.shape[0]))
        self.compliance = 0.5 * (self.compliance + self.compliance.T)
        self.compliance.setflags(write=False)
        self._chol_inv = np.linalg.cholesky(self.compliance)

    @property
    def size(self):
        return self.voigt.shape[0]

    @classmethod
    def scalar(cls, modulus):
        return cls([[float(modulus)]])

    @classmethod
    def identity(cls, dim):
        """The identity map on symmetric tensors (``C eps = eps``)."""
        return cls(np.diag(1.0 / shear_factor(dim)))

    @classmethod
    def isotropic(cls, dim, lam, mu):
        """Isotropic stiffness ``lam tr(eps) I + 2 mu eps``."""
        m = voigt_size(dim)
        voigt = np.zeros((m, m))
        voigt[:dim, :dim] = lam
        voigt[:dim, :dim] += 2.0 * mu * np.eye(dim)
        voigt[dim:, dim:] = mu * np.eye(m - dim)
        return cls(voigt)

    @classmethod
    def random(cls, dim, rng, spread=1.0):
        """Random SPD stiffness with eigenvalues roughly in ``[1, 1 + spread * m]``."""
        m = voigt_size(dim)
        a = rng.normal(size=(m, m))
        return cls(np.eye(m) + spread * a @ a.T / m)

    def eigvals(self):
        return np.linalg.eigvalsh(self.voigt)

    def apply(self, strain_v):
        return np.asarray(strain_v, dtype=float) @ self.voigt.T

    def apply_inverse(self, stress_v):
        return np.asarray(stress_v, dtype=float) @ self.compliance.T

    def apply_tensor(self, mat):
        """``C eps`` for symmetric matrices of shape (..., n, n)."""
        return stress_voigt_to_matrix(self.apply(matrix_to_strain_voigt(mat)))

    def apply_inverse_tensor(self, mat):
        return strain_voigt_to_matrix(self.apply_inverse(matrix_to_stress_voigt(mat)))

    def strain_embedding(self, strain_v):
        """Coordinates whose squared Euclidean norm is ``1/2 C eps . eps``."""
        return np.asarray(strain_v, dtype=float) @ self._chol / np.sqrt(2.0)

    def stress_embedding(self, stress_v):
        """Coordinates whose squared Euclidean norm is ``1/2 C^-1 sig . sig``."""
        return np.asarray(stress_v, dtype=float) @ self._chol_inv / np.sqrt(2.0)

    def __eq__(self, other):
        if not isinstance(other, ElasticityTensor):
            return NotImplemented
        return np.array_equal(self.voigt, other.voigt)

    def __hash__(self):
        return hash(self.voigt.tobytes())

    def __repr__(self):
        return f"ElasticityTensor(dim={self.dim}, voigt={self.voigt.tolist()})"
