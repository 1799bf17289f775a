"""Relaxation of two-well data sets.

Covers the 1D flag set and its reduced minimization, the incompatibility
range ``alpha_minus <= alpha_hat(nu) <= alpha_plus`` over normals, membership
in the relaxed set, rank-one laminate decompositions and laminate fields,
separating quadratic certificates, and the convex-envelope comparison.

Throughout, wells are centered: ``a = -b``, so ``D+ = {(C^-1 s + b, s)}``
with ``s . b >= -Cb . b`` and ``D- = -D+``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.optimize as opt

from .datasets import FlagDataSet1D, TwoWellDataSet
from .phase import LocalState, StateField, local_sq_norm, sq_norm_density
from .tensors import ElasticityTensor, SymMatrix, strain_voigt_to_matrix, sym_outer

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------- acoustic system

def stiffness_4(C: ElasticityTensor):
    """Full fourth-order stiffness ``C_ijkl`` with minor and major symmetries."""
    n = C.dim
    out = np.zeros((n, n, n, n))
    for k in range(n):
        for l in range(n):
            e = np.zeros((n, n))
            e[k, l] += 0.5
            e[l, k] += 0.5
            out[:, :, k, l] = C.apply_tensor(e)
    return out


def _as_matrix(b):
    return b.to_matrix() if isinstance(b, SymMatrix) else np.asarray(b, dtype=float)


def c_hat_many(C4, b, nus):
    """Solve ``A(nu) c = (C b) nu`` for a batch of unit normals ``nus`` (shape (N, n))."""
    nus = np.atleast_2d(nus)
    A = np.einsum("ijkl,nj,nl->nik", C4, nus, nus)
    rhs = np.einsum("ijkl,kl,nj->ni", C4, b, nus)
    return np.linalg.solve(A, rhs[..., None])[..., 0]


def _alpha_terms(C4, b, nus):
    c = c_hat_many(C4, b, nus)
    e = sym_outer(c, nus) - b
    s = np.einsum("ijkl,nkl->nij", C4, e)
    alpha = np.einsum("nij,nij->n", s, e)
    return alpha, c, s


def c_hat(C: ElasticityTensor, b, nu):
    """The unique ``c`` with ``C(c (.) nu - b) nu = 0``."""
    nu = np.asarray(nu, dtype=float)
    if abs(np.linalg.norm(nu) - 1.0) > 1e-12:
        raise ValueError("nu must be a unit vector")
    return c_hat_many(stiffness_4(C), _as_matrix(b), nu[None])[0]


def alpha_hat(C: ElasticityTensor, b, nu):
    """``C(c (.) nu - b) . (c (.) nu - b)`` at ``c = c_hat(nu)``."""
    nu = np.asarray(nu, dtype=float)
    return float(_alpha_terms(stiffness_4(C), _as_matrix(b), nu[None] / np.linalg.norm(nu))[0][0])


def alpha_hat_many(C: ElasticityTensor, b, nus):
    nus = np.atleast_2d(nus)
    nus = nus / np.linalg.norm(nus, axis=1, keepdims=True)
    return _alpha_terms(stiffness_4(C), _as_matrix(b), nus)[0]


def fibonacci_sphere(n):
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    r = np.sqrt(1.0 - z ** 2)
    phi = np.pi * (1.0 + np.sqrt(5.0)) * k
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _refine_2d(C4, b, theta0, step, sign):
    f = lambda th: sign * _alpha_terms(C4, b, np.array([[np.cos(th), np.sin(th)]]))[0][0]  # noqa
    res = opt.minimize_scalar(f, bounds=(theta0 - step, theta0 + step), method="bounded",
                              options={"xatol": 1e-12})
    th = res.x if res.fun <= f(theta0) else theta0

    def grad(t):
        nu = np.array([[np.cos(t), np.sin(t)]])
        _, c, s = _alpha_terms(C4, b, nu)
        return 2.0 * (s[0] @ c[0]) @ np.array([-np.sin(t), np.cos(t)])

    # polish on the analytic derivative when it brackets a root
    lo, hi = th - 1e-6, th + 1e-6
    glo, ghi = grad(lo), grad(hi)
    if glo * ghi < 0:
        th = opt.brentq(grad, lo, hi, xtol=1e-15)
    return np.array([np.cos(th), np.sin(th)])


def _chart(nu0):
    t1 = np.linalg.svd(nu0[None])[2][1]
    t2 = np.cross(nu0, t1)
    return t1, t2


def _refine_3d(C4, b, nu0, sign):
    t1, t2 = _chart(nu0)

    def nu_of(x):
        v = nu0 + x[0] * t1 + x[1] * t2
        return v / np.linalg.norm(v), v

    def f(x):
        return sign * _alpha_terms(C4, b, nu_of(x)[0][None])[0][0]

    def fg(x):
        nu, v = nu_of(x)
        a, c, s = _alpha_terms(C4, b, nu[None])
        g_nu = 2.0 * s[0] @ c[0]
        proj = (np.eye(3) - np.outer(nu, nu)) / np.linalg.norm(v)
        return sign * a[0], sign * np.array([g_nu @ proj @ t1, g_nu @ proj @ t2])

    simplex = np.array([[0.0, 0.0], [0.05, 0.0], [0.0, 0.05]])
    res = opt.minimize(f, np.zeros(2), method="Nelder-Mead",
                       options={"initial_simplex": simplex, "xatol": 1e-10, "fatol": 1e-15,
                                "maxiter": 4000})
    x = res.x
    # polish: stationary point of the analytic chart gradient
    pol = opt.root(lambda y: fg(y)[1], x, method="hybr", options={"xtol": 1e-15})
    better = np.linalg.norm(fg(pol.x)[1]) < np.linalg.norm(fg(x)[1])
    if better and np.linalg.norm(pol.x - x) < 0.05 and f(pol.x) <= res.fun + 1e-12 * abs(res.fun):
        x = pol.x
    return nu_of(x)[0]


def _sphere_extremum(C: ElasticityTensor, b, sign):
    C4 = stiffness_4(C)
    n = C.dim
    if n == 1:
        return np.array([1.0])
    if n == 2:
        thetas = np.arange(720) * np.pi / 720
        nus = np.column_stack([np.cos(thetas), np.sin(thetas)])
        vals = sign * _alpha_terms(C4, b, nus)[0]
        i = int(np.argmin(vals))
        return _refine_2d(C4, b, thetas[i], np.pi / 720, sign)
    nus = fibonacci_sphere(2000)
    vals = sign * _alpha_terms(C4, b, nus)[0]
    best, best_val = None, np.inf
    for i in np.argsort(vals, kind="stable")[:3]:
        nu = _refine_3d(C4, b, nus[i], sign)
        v = sign * _alpha_terms(C4, b, nu[None])[0][0]
        if v < best_val - 1e-15:
            best, best_val = nu, v
    return best


def _canonical(nu):
    """Representative of ``{nu, -nu}`` with first nonzero component positive."""
    k = np.flatnonzero(np.abs(nu) > 1e-14)[0]
    return nu if nu[k] > 0 else -nu


def alpha_range(C: ElasticityTensor, b):
    """``(alpha_minus, alpha_plus, nu_minus, nu_plus)`` over unit normals."""
    bm = _as_matrix(b)
    if not np.any(bm):
        raise ValueError("b must be nonzero")
    C4 = stiffness_4(C)
    nu_m = _canonical(_sphere_extremum(C, bm, 1.0))
    nu_p = _canonical(_sphere_extremum(C, bm, -1.0))
    a_m = max(0.0, float(_alpha_terms(C4, bm, nu_m[None])[0][0]))
    a_p = max(a_m, float(_alpha_terms(C4, bm, nu_p[None])[0][0]))
    return a_m, a_p, nu_m, nu_p


# ------------------------------------------------------------------ relaxed set

class FlagMembership(enum.Enum):
    ON_ORIGINAL_SET = "OnOriginalSet"
    IN_RELAXED_SET = "InRelaxedSet"
    OUTSIDE = "Outside"


class Membership(enum.Enum):
    IN_DLOC_PLUS = "InDlocPlus"
    IN_DLOC_MINUS = "InDlocMinus"
    IN_RELAXED_INTERIOR = "InRelaxedInterior"
    OUTSIDE = "Outside"


def flag_membership_many(C, sigma0, eps, sig, tol=1e-9):
    """Vectorized flag classification: 0 original set, 1 relaxed only, 2 outside."""
    eps, sig = np.broadcast_arrays(np.asarray(eps, float), np.asarray(sig, float))
    lower = (np.abs(sig - (C * eps + sigma0)) <= tol) & (eps <= tol)
    upper = (np.abs(sig - (C * eps - sigma0)) <= tol) & (eps >= -tol)
    original = lower | upper
    band = ((np.abs(sig) <= sigma0 + tol) & (sig <= C * eps + sigma0 + tol)
            & (sig >= C * eps - sigma0 - tol))
    return np.where(original, 0, np.where(band, 1, 2))


def membership_flag_1d(flag: FlagDataSet1D, eps, sig, tol=1e-9) -> FlagMembership:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    code = int(flag_membership_many(flag.C, flag.sigma0, eps, sig, tol))
    return list(FlagMembership)[code]


@dataclass(frozen=True)
class TwoWellRelaxation:
    """Relaxation data of the centered two-well set with half-width ``b``."""

    C: ElasticityTensor
    b: SymMatrix
    alpha_minus: float
    alpha_plus: float
    nu_minus: np.ndarray
    nu_plus: np.ndarray
    c_hat_minus: np.ndarray
    cbb: float

    @classmethod
    def compute(cls, C: ElasticityTensor, b: SymMatrix):
        a_m, a_p, nu_m, nu_p = alpha_range(C, b)
        c = c_hat(C, b, nu_m)
        bv = b.strain_voigt()
        return cls(C, b, a_m, a_p, nu_m, nu_p, c, float(bv @ C.apply(bv)))

    @classmethod
    def from_dataset(cls, ds: TwoWellDataSet):
        """``(relaxation, shift)``: ``ds`` equals the centered set translated by ``shift``."""
        half, shift = ds.centered()
        return cls.compute(ds.C, half), shift

    @property
    def compatible(self):
        return self.alpha_minus < 1e-10

    @property
    def z_hat(self) -> LocalState:
        """``(c (.) nu, C(c (.) nu - b))`` at the minimizing normal."""
        e = SymMatrix.from_matrix(sym_outer(self.c_hat_minus, self.nu_minus))
        s = SymMatrix.from_stress_voigt(self.C.apply((e - self.b).strain_voigt()))
        return LocalState(e, s)

    def coordinates(self, z: LocalState):
        """``(sigma . b, mu, residual)`` with ``eps - C^-1 sigma = mu b + residual``."""
        sb, mu, resid = self.coordinates_many(*z.voigt())
        return float(sb[0]), float(mu[0]), float(resid[0])

    def coordinates_many(self, eps_v, sig_v):
        """Vectorized :meth:`coordinates` over Voigt arrays of shape (N, m)."""
        eps_v = np.atleast_2d(eps_v)
        sig_v = np.atleast_2d(sig_v)
        d = strain_voigt_to_matrix(eps_v - self.C.apply_inverse(sig_v))
        bm = self.b.to_matrix()
        mu = np.einsum("nij,ij->n", d, bm) / np.sum(bm * bm)
        resid = np.linalg.norm((d - mu[:, None, None] * bm).reshape(len(mu), -1), axis=1)
        return sig_v @ self.b.strain_voigt(), mu, resid

    def to_dict(self):
        return {"b": self.b.to_matrix().tolist(), "C_voigt": self.C.voigt.tolist(),
                "alpha_minus": self.alpha_minus, "alpha_plus": self.alpha_plus,
                "nu_minus": self.nu_minus.tolist(), "nu_plus": self.nu_plus.tolist(),
                "c_hat_minus": self.c_hat_minus.tolist(), "cbb": self.cbb,
                "compatible": bool(self.compatible)}


def _state_scale(z: LocalState):
    eps_v, sig_v = z.voigt()
    return float(np.sqrt(eps_v @ eps_v + sig_v @ sig_v))


def membership_relaxed_nd(rx: TwoWellRelaxation, z: LocalState, tol=1e-9,
                          l_tol: Optional[float] = None) -> Membership:
    """Classify ``z`` against the relaxed two-well set (closed convention)."""
    if l_tol is None:
        l_tol = 1e-9 * (1.0 + _state_scale(z))
    sb, mu, resid = rx.coordinates(z)
    if resid > l_tol:
        return Membership.OUTSIDE
    bnorm = rx.b.norm()
    if abs(mu - 1.0) * bnorm <= l_tol and sb >= -rx.cbb - tol:
        return Membership.IN_DLOC_PLUS
    if abs(mu + 1.0) * bnorm <= l_tol and sb <= rx.cbb + tol:
        return Membership.IN_DLOC_MINUS
    if abs(mu) <= 1.0 and abs(sb + rx.alpha_minus * mu) <= rx.cbb - rx.alpha_minus + tol:
        return Membership.IN_RELAXED_INTERIOR
    return Membership.OUTSIDE


# ------------------------------------------------------------ rank-one laminates

@dataclass(frozen=True)
class LaminateDecomposition:
    """``z = lam z_minus + (1 - lam) z_plus`` with ``z_plus - z_minus = 2 z_hat``.

    ``lam = (1 - mu) / 2`` is the volume fraction of ``z_minus``.
    """

    z: LocalState
    z_minus: LocalState
    z_plus: LocalState
    lam: float
    nu: np.ndarray
    c: np.ndarray
    z_hat: LocalState
    C: ElasticityTensor

    def residuals(self):
        """Reconstruction, strain-jump and traction-jump residuals."""
        recon = self.z_minus * self.lam + self.z_plus * (1.0 - self.lam) - self.z
        r_recon = max(np.abs(recon.eps.entries).max(), np.abs(recon.sig.entries).max())
        de = (self.z_plus.eps - self.z_minus.eps).to_matrix()
        r_eps = np.abs(de - sym_outer(self.c, self.nu)).max()
        ds = (self.z_plus.sig - self.z_minus.sig).to_matrix()
        r_sig = np.abs(ds @ self.nu).max()
        return float(r_recon), float(r_eps), float(r_sig)

    def bound_constant(self):
        """``K`` with ``|z_pm| <= K (|z| + 1)``: ``K = max(1, 2 |z_hat|)``."""
        return max(1.0, 2.0 * _state_scale(self.z_hat))


def rank_one_decompose(rx: TwoWellRelaxation, z: LocalState, tol=1e-9) -> LaminateDecomposition:
    cls = membership_relaxed_nd(rx, z, tol)
    if cls is not Membership.IN_RELAXED_INTERIOR:
        raise ValueError(f"state is not in the relaxed interior ({cls.value})")
    _, mu, _ = rx.coordinates(z)
    zh = rx.z_hat
    z_plus = z + zh * (1.0 - mu)
    z_minus = z + zh * (-1.0 - mu)
    return LaminateDecomposition(z, z_minus, z_plus, (1.0 - mu) / 2.0, rx.nu_minus,
                                 2.0 * rx.c_hat_minus, zh, rx.C)


def generate_laminate_field(mesh, decomp: LaminateDecomposition, h: int) -> StateField:
    """Element ``e`` takes ``z_minus`` where ``frac(h x_e . nu) < lam``, else ``z_plus``.

    ``x_e`` is the element centroid.
    """
    if int(h) < 1:
        raise ValueError("h must be a positive integer")
    if mesh.dim != decomp.z.dim:
        raise ValueError("mesh and decomposition dimensions differ")
    phase = np.mod(h * (mesh.centroids @ decomp.nu), 1.0)
    minus = phase < decomp.lam
    em, sm = decomp.z_minus.voigt()
    ep, spl = decomp.z_plus.voigt()
    eps = np.where(minus[:, None], em, ep)
    sig = np.where(minus[:, None], sm, spl)
    return StateField(eps, sig, mesh.volumes, decomp.C)


def laminate_mean_error(mesh, fld: StateField, z: LocalState, nu):
    """Largest energy norm of ``int_{x . nu <= s} (fld - z)`` over cuts ``s``."""
    order = np.argsort(mesh.centroids @ np.asarray(nu), kind="stable")
    z_eps, z_sig = z.voigt()
    w = fld.weights[order, None]
    de = np.cumsum(w * (fld.eps[order] - z_eps), axis=0)
    ds = np.cumsum(w * (fld.sig[order] - z_sig), axis=0)
    return float(np.sqrt(sq_norm_density(de, ds, fld.metric).max()))


# ---------------------------------------------------------- separating quadratic

def _project_L(rx: TwoWellRelaxation, eps_v, sig_v):
    """Energy-orthogonal projection onto ``L = {(C^-1 s + mu b, s)}``.

    Vectorized over rows; returns ``(s_v, mu)`` with shapes (N, m) and (N,).
    """
    C = rx.C
    m = C.size
    basis_e = np.vstack([C.compliance, rx.b.strain_voigt()[None]])  # rows: (m+1, m)
    basis_s = np.vstack([np.eye(m), np.zeros((1, m))])
    G = np.hstack([C.strain_embedding(basis_e), C.stress_embedding(basis_s)])
    rhs = np.hstack([C.strain_embedding(np.atleast_2d(eps_v)),
                     C.stress_embedding(np.atleast_2d(sig_v))])
    coef = rhs @ np.linalg.pinv(G)
    return coef[:, :m], coef[:, m]


def quadratic_Q_many(rx: TwoWellRelaxation, eps_v, sig_v):
    s_v, mu = _project_L(rx, eps_v, sig_v)
    sb = s_v @ rx.b.strain_voigt()
    return -(sb + rx.alpha_minus * mu) * (sb + rx.alpha_plus * mu)


def quadratic_Q(rx: TwoWellRelaxation, z: LocalState):
    return float(quadratic_Q_many(rx, *z.voigt())[0])


def in_strip_U(rx: TwoWellRelaxation, z: LocalState, tol=1e-9):
    sb, mu, resid = rx.coordinates(z)
    return (resid <= 1e-9 * (1.0 + _state_scale(z)) and -1.0 - tol <= mu < 1.0
            and sb + rx.alpha_minus * mu > rx.cbb - rx.alpha_minus)


@dataclass(frozen=True)
class SeparatingCertificate:
    rx: TwoWellRelaxation
    z0: LocalState
    z_star: LocalState
    delta: float

    def __call__(self, z: LocalState) -> float:
        return float(self.evaluate_many(*z.voigt())[0])

    def evaluate_many(self, eps_v, sig_v):
        """``f`` on Voigt arrays of shape (N, m)."""
        eps_v, sig_v = np.atleast_2d(eps_v), np.atleast_2d(sig_v)
        _, mu, _ = self.rx.coordinates_many(eps_v, sig_v)
        e_star, s_star = self.z_star.voigt()
        return quadratic_Q_many(self.rx, eps_v - e_star, sig_v - s_star) + self.delta * (1.0 - mu)


def separating_certificate(rx: TwoWellRelaxation, eps0: SymMatrix, sig0: SymMatrix):
    z0 = LocalState(eps0, sig0)
    if not in_strip_U(rx, z0):
        raise ValueError("point is not in the separation strip")
    sb, mu0, _ = rx.coordinates(z0)
    delta = 0.5 * (sb + rx.alpha_minus * mu0 - (rx.cbb - rx.alpha_minus)) ** 2
    z_star = z0 + rx.z_hat * (1.0 - mu0)
    return SeparatingCertificate(rx, z0, z_star, float(delta))


# ------------------------------------------------------- sampling the relaxed set

def _states_from(rx, rng, sb, mu, scale):
    """Voigt arrays of states with given ``sigma . b`` and ``mu`` and a random
    stress component orthogonal to ``b``."""
    n = len(sb)
    bs, bsig = rx.b.strain_voigt(), rx.b.stress_voigt()
    bb = float(bs @ bsig)
    perp = rng.normal(size=(n, rx.C.size)) * scale
    perp -= np.outer(perp @ bs / bb, bsig)
    sig = perp + np.outer(sb / bb, bsig)
    eps = rx.C.apply_inverse(sig) + np.outer(mu, bs)
    return eps, sig


def to_states(eps_v, sig_v):
    return [LocalState.from_voigt(e, s) for e, s in zip(eps_v, sig_v)]


def sample_relaxed_interior(rx: TwoWellRelaxation, rng, n, scale=1.0, shrink=0.999):
    """Voigt arrays of random points with ``|mu| < 1`` inside the band."""
    width = rx.cbb - rx.alpha_minus
    mu = rng.uniform(-1, 1, size=n) * shrink
    sb = rng.uniform(-width, width, size=n) * shrink - rx.alpha_minus * mu
    return _states_from(rx, rng, sb, mu, scale)


def sample_relaxed_set(rx: TwoWellRelaxation, rng, n, scale=1.0):
    """Voigt arrays of random points of the relaxed set: thirds from D+, D- and the band."""
    n_plus = n_minus = n // 3
    n_band = n - n_plus - n_minus
    parts = [sample_relaxed_interior(rx, rng, n_band, scale, shrink=1.0)]
    for sign, k in ((1.0, n_plus), (-1.0, n_minus)):
        sb = -rx.cbb + rng.exponential(2.0 * rx.cbb + 1.0, size=k)
        e, sg = _states_from(rx, rng, sb, np.ones(k), scale)
        parts.append((sign * e, sign * sg))
    return np.vstack([p[0] for p in parts]), np.vstack([p[1] for p in parts])


def sample_strip_U(rx: TwoWellRelaxation, rng, n, scale=1.0):
    """Voigt arrays of random points of the separation strip."""
    mu = rng.uniform(-1, 1, size=n)
    excess = rng.uniform(0.05, 2.0, size=n) * (rx.cbb + 1.0)
    sb = rx.cbb - rx.alpha_minus + excess - rx.alpha_minus * mu
    return _states_from(rx, rng, sb, mu, scale)


def boundary_polyline(rx: TwoWellRelaxation, extend=None):
    """Boundary pieces of the relaxed set in the ``(sigma . b, mu)`` plane.

    Returns ``[(name, points)]``; the half-lines are cut at ``extend``
    beyond their finite endpoint (default ``C b . b``).
    """
    R = rx.cbb if extend is None else float(extend)
    cbb, am = rx.cbb, rx.alpha_minus
    return [
        ("plus", np.array([[-cbb, 1.0], [cbb + R, 1.0]])),
        ("minus", np.array([[-cbb - R, -1.0], [cbb, -1.0]])),
        ("right", np.array([[cbb, -1.0], [cbb - 2 * am, 1.0]])),
        ("left", np.array([[-cbb + 2 * am, -1.0], [-cbb, 1.0]])),
    ]


# ----------------------------------------------------------- 1D reduced problem

def _free_sigma_value(s, lam, sigma0):
    mu = 1.0 - lam
    alpha = np.maximum(s + 2 * mu * sigma0, 0.0)
    beta = np.minimum(s - 2 * lam * sigma0, 0.0)
    g = (s - lam * alpha - mu * beta) ** 2 + lam * mu * (alpha - beta - 2 * sigma0) ** 2
    sig = lam * (alpha - sigma0) + mu * (beta + sigma0)
    return g, alpha, beta, sig


def _fixed_sigma_value(s, lam, sigma0, sig):
    mu = 1.0 - lam
    P, Q = sig + sigma0, sig - sigma0

    def G(a, b):
        return (s - lam * a - mu * b) ** 2 + lam * (P - a) ** 2 + mu * (Q - b) ** 2

    c = s - lam * P - mu * Q
    cands = [
        (P + c / 2, Q + c / 2),
        (np.zeros_like(s + lam), np.minimum((s + Q) / (1 + mu), 0.0)),
        (np.maximum((s + P) / (1 + lam), 0.0), np.zeros_like(s + lam)),
        (np.zeros_like(s + lam), np.zeros_like(s + lam)),
    ]
    best_g = best_a = best_b = None
    for a, b in cands:
        a, b = np.broadcast_arrays(a, b)
        g = np.where((a >= 0) & (b <= 0), G(a, b), np.inf)
        if best_g is None:
            best_g, best_a, best_b = g, a, b
        else:
            take = g < best_g
            best_g = np.where(take, g, best_g)
            best_a = np.where(take, a, best_a)
            best_b = np.where(take, b, best_b)
    return best_g, best_a, best_b, np.broadcast_to(sig, best_g.shape)


@dataclass
class Reduced1DResult:
    d2_min: np.ndarray
    lambda_a: np.ndarray
    eps_a: np.ndarray
    eps_b: np.ndarray
    sigma_bar: np.ndarray

    def item(self):
        return Reduced1DResult(*(float(np.asarray(v).reshape(-1)[0]) for v in
                                 (self.d2_min, self.lambda_a, self.eps_a, self.eps_b,
                                  self.sigma_bar)))

    def as_tuple(self):
        return self.d2_min, self.lambda_a, self.eps_a, self.eps_b, self.sigma_bar


def reduced_1d_two_well_solve(C, sigma0, eps_bar, sigma_bar=None, n_scan=401, n_golden=80):
    """Minimize ``lam d2((eA, s), D+) + (1 - lam) d2((eB, s), D-)`` subject to
    ``lam eA + (1 - lam) eB = eps_bar`` (vectorized over ``eps_bar``).

    ``D+ = {(e, C e - sigma0), e >= 0}`` and ``D- = {(e, C e + sigma0), e <= 0}``.
    With ``sigma_bar`` given, the common stress is fixed instead of free.
    Distances use the metric ``C``. Returns a :class:`Reduced1DResult`
    (``lambda_a`` is the weight of the ``D+`` phase).
    """
    C, sigma0 = float(C), float(sigma0)
    if not C > 0 or not sigma0 >= 0:
        raise ValueError("need C > 0 and sigma0 >= 0")
    eps_bar = np.asarray(eps_bar, dtype=float)
    scalar = eps_bar.ndim == 0
    s = np.atleast_1d(C * eps_bar)
    sb = None if sigma_bar is None else np.broadcast_to(
        np.asarray(sigma_bar, dtype=float), eps_bar.shape).reshape(-1)

    def evaluate(lam):
        if sb is None:
            return _free_sigma_value(s[:, None] if lam.ndim == 2 else s, lam, sigma0)
        sg = sb[:, None] if lam.ndim == 2 else sb
        ss = s[:, None] if lam.ndim == 2 else s
        return _fixed_sigma_value(ss, lam, sigma0, sg)

    grid = np.linspace(0.0, 1.0, n_scan)
    g = evaluate(np.broadcast_to(grid, (s.size, n_scan)))[0]
    i = np.argmin(g, axis=1)
    lo = grid[np.maximum(i - 1, 0)]
    hi = grid[np.minimum(i + 1, n_scan - 1)]
    best_lam, best_g = grid[i], g[np.arange(s.size), i]
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = evaluate(x1)[0], evaluate(x2)[0]
    for _ in range(n_golden):
        left = f1 < f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        x2n = np.where(left, x1, lo + GOLDEN * (hi - lo))
        x1n = np.where(left, hi - GOLDEN * (hi - lo), x2)
        f_new = evaluate(np.where(left, x1n, x2n))[0]
        f1, f2 = np.where(left, f_new, f2), np.where(left, f1, f_new)
        x1, x2 = x1n, x2n
    for x, f in ((x1, f1), (x2, f2)):
        take = f < best_g
        best_lam = np.where(take, x, best_lam)
        best_g = np.where(take, f, best_g)
    g, alpha, beta, sig = evaluate(best_lam)
    lam, mu = best_lam, 1.0 - best_lam
    a, b = alpha / C, beta / C
    r = np.atleast_1d(eps_bar) - lam * a - mu * b
    out = Reduced1DResult(g / (2 * C), lam, a + r, b + r, np.asarray(sig, dtype=float))
    return out.item() if scalar else out


# ----------------------------------------------------------- convex envelope (1D)

@dataclass(frozen=True)
class ConvexEnvelope1D:
    C: float
    sigma0: float

    def W(self, eps):
        eps = np.asarray(eps, dtype=float)
        s = self.sigma0 / self.C
        return np.minimum(0.5 * self.C * (eps + s) ** 2, 0.5 * self.C * (eps - s) ** 2)

    def W_envelope(self, eps):
        eps = np.asarray(eps, dtype=float)
        s = self.sigma0 / self.C
        return np.where(eps < -s, 0.5 * self.C * (eps + s) ** 2,
                        np.where(eps > s, 0.5 * self.C * (eps - s) ** 2, 0.0))

    def in_envelope_set(self, eps, sig, tol=1e-9):
        eps, sig = np.broadcast_arrays(np.asarray(eps, float), np.asarray(sig, float))
        s = self.sigma0 / self.C
        left = (np.abs(sig - (self.C * eps + self.sigma0)) <= tol) & (eps <= -s + tol)
        mid = (np.abs(sig) <= tol) & (np.abs(eps) <= s + tol)
        right = (np.abs(sig - (self.C * eps - self.sigma0)) <= tol) & (eps >= s - tol)
        return left | mid | right

    def witness(self):
        """A state in the flag set that is not in the envelope set."""
        return 0.0, self.sigma0 / 2.0

    def to_dict(self):
        s = self.sigma0 / self.C
        return {"C": self.C, "sigma0": self.sigma0,
                "branches": [
                    {"range": [None, -s], "formula": "0.5*C*(eps + sigma0/C)**2"},
                    {"range": [-s, s], "formula": "0"},
                    {"range": [s, None], "formula": "0.5*C*(eps - sigma0/C)**2"}],
                "W_envelope_at_0": float(self.W_envelope(0.0)),
                "witness": list(self.witness())}


def convex_envelope_1d(C, sigma0) -> ConvexEnvelope1D:
    if not C > 0 or not sigma0 >= 0:
        raise ValueError("need C > 0 and sigma0 >= 0")
    return ConvexEnvelope1D(float(C), float(sigma0))


def local_norm(z: LocalState, C: ElasticityTensor):
    return float(np.sqrt(local_sq_norm(z, C)))
