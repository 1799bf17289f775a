"""Factorized SPD solves for assembled stiffness matrices."""
from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

try:  # optional sparse Cholesky
    from sksparse.cholmod import cholesky as _cholmod
except ImportError:  # pragma: no cover - depends on environment
    _cholmod = None

DENSE_LIMIT = 6000


class SingularStiffnessError(np.linalg.LinAlgError):
    """Raised when the stiffness has a null space; carries a null direction."""

    def __init__(self, message, null_direction=None):
        super().__init__(message)
        self.null_direction = null_direction


class SolveError(np.linalg.LinAlgError):
    pass


def _null_direction(K):
    dense = K.toarray() if sp.issparse(K) else np.asarray(K)
    w, v = np.linalg.eigh(dense)
    return v[:, 0], w[0]


class SPDSolver:
    """Solve ``K x = b`` for a fixed SPD ``K``.

    Backends: ``"cholmod"`` (if scikit-sparse is importable), ``"dense"``
    Cholesky for up to ``DENSE_LIMIT`` unknowns, else ``"cg"`` with a
    Jacobi preconditioner and relative tolerance ``rtol``.
    """

    def __init__(self, K, backend="auto", rtol=1e-12, pivot_tol=1e-13):
        K = sp.csc_matrix(K)
        self.n = K.shape[0]
        self.K = K
        self.rtol = rtol
        if backend == "auto":
            if _cholmod is not None:
                backend = "cholmod"
            elif self.n <= DENSE_LIMIT:
                backend = "dense"
            else:
                backend = "cg"
        self.backend = backend
        if self.n == 0:
            return
        diag = K.diagonal()
        if np.any(diag <= 0):
            vec, _ = _null_direction(K) if self.n <= DENSE_LIMIT else (None, None)
            raise SingularStiffnessError("stiffness has a nonpositive diagonal entry", vec)
        if backend == "dense":
            try:
                self._factor = scipy.linalg.cho_factor(K.toarray(), lower=True)
            except np.linalg.LinAlgError:
                vec, _ = _null_direction(K)
                raise SingularStiffnessError("stiffness is not positive definite", vec) from None
            pivots = np.diag(self._factor[0]) ** 2
            if pivots.min() <= pivot_tol * diag.max():
                vec, _ = _null_direction(K)
                raise SingularStiffnessError("stiffness is singular (mechanism)", vec)
        elif backend == "cholmod":
            self._factor = _cholmod(K)
        elif backend == "cg":
            self._precond = sp.diags(1.0 / diag)
        else:
            raise ValueError(f"unknown backend {backend!r}")

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if self.n == 0:
            return np.zeros_like(b)
        if self.backend == "dense":
            return scipy.linalg.cho_solve(self._factor, b)
        if self.backend == "cholmod":
            return self._factor(b)
        if b.ndim > 1:
            return np.column_stack([self.solve(col) for col in b.T])
        if not np.any(b):
            return np.zeros_like(b)
        x, info = spla.cg(self.K, b, rtol=self.rtol, atol=0.0, M=self._precond,
                          maxiter=10 * self.n)
        if info != 0:
            raise SolveError(f"conjugate gradient did not converge (info={info})")
        return x
