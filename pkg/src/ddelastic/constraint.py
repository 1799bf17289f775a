"""Discrete compatibility/equilibrium constraints and exact projection onto them.

P1 displacements on a simplicial mesh, one strain/stress state per element.
A field ``(eps, sig)`` lies in the constraint set when ``eps = B u`` for a
displacement ``u`` meeting the Dirichlet data and ``B^T W sig = F`` on the
free degrees of freedom.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .linalg import SPDSolver
from .mesh import Mesh
from .phase import StateField, sq_norm_density
from .tensors import ElasticityTensor, voigt_size


class BoundaryDataError(ValueError):
    pass


@dataclass
class BoundaryData:
    """Dirichlet values, facet tractions and an element body force.

    Attributes
    ----------
    dirichlet : dict
        ``(node, component) -> g``.
    neumann : list
        ``(facet, traction)`` pairs; a facet is a tuple of node ids.
    body_force : array or None
        Shape ``(n_elements, dim)``, or a single vector applied everywhere.
    """

    dirichlet: Dict[Tuple[int, int], float] = field(default_factory=dict)
    neumann: List[Tuple[tuple, np.ndarray]] = field(default_factory=list)
    body_force: Optional[np.ndarray] = None

    @classmethod
    def build(cls, mesh: Mesh, fixed=(), tractions=(), body_force=None):
        """Build from node-set names.

        ``fixed`` holds ``(set, components, value)`` where ``value`` is a
        scalar or one value per listed component; ``tractions`` holds
        ``(set, vector)`` applied on every boundary facet of the set.
        """
        dirichlet = {}
        for spec in fixed:
            where, comps, value = spec
            comps = [comps] if np.isscalar(comps) else list(comps)
            values = np.broadcast_to(np.asarray(value, dtype=float), (len(comps),))
            for node in mesh.node_set(where):
                for c, g in zip(comps, values):
                    key = (int(node), int(c))
                    if key in dirichlet and dirichlet[key] != g:
                        raise BoundaryDataError(f"node {node} component {c} fixed twice "
                                                f"with different values")
                    dirichlet[key] = float(g)
        neumann = []
        for where, vec in tractions:
            facets = mesh.facets_on(where)
            if not facets:
                raise BoundaryDataError(f"node set {where!r} contains no boundary facet")
            neumann += [(f, np.asarray(vec, dtype=float).reshape(mesh.dim)) for f in facets]
        return cls(dirichlet, neumann, body_force)

    def validate(self, mesh: Mesh):
        if not self.dirichlet:
            raise BoundaryDataError("Dirichlet data must fix at least one displacement component")
        for (node, comp) in self.dirichlet:
            if not (0 <= node < mesh.n_nodes and 0 <= comp < mesh.dim):
                raise BoundaryDataError(f"Dirichlet entry ({node}, {comp}) is out of range")
        for facet, h in self.neumann:
            if len(facet) != mesh.dim or any(not 0 <= v < mesh.n_nodes for v in facet):
                raise BoundaryDataError(f"bad traction facet {facet}")
            if np.shape(h) != (mesh.dim,):
                raise BoundaryDataError(f"traction on {facet} must have {mesh.dim} components")
            for c in np.flatnonzero(np.asarray(h) != 0):
                # a load applied only to fixed components would be silently lost
                if all((v, int(c)) in self.dirichlet for v in facet):
                    raise BoundaryDataError(
                        f"facet {facet} carries traction in component {c} but is fixed there")
        if self.body_force is not None:
            bf = np.asarray(self.body_force, dtype=float)
            if bf.shape not in ((mesh.dim,), (mesh.n_elements, mesh.dim)):
                raise BoundaryDataError(f"body force must have shape ({mesh.dim},) or "
                                        f"({mesh.n_elements}, {mesh.dim}), got {bf.shape}")

    @property
    def homogeneous(self):
        no_g = all(v == 0 for v in self.dirichlet.values())
        no_h = all(not np.any(h) for _, h in self.neumann)
        no_f = self.body_force is None or not np.any(self.body_force)
        return no_g and no_h and no_f


def strain_displacement(mesh: Mesh):
    """Sparse ``B`` mapping nodal displacements to element strains (engineering shear)."""
    dim, ne = mesh.dim, mesh.n_elements
    m = voigt_size(dim)
    n_dof = mesh.n_nodes * dim
    if dim == 1:
        L = mesh.volumes
        rows = np.repeat(np.arange(ne), 2)
        cols = mesh.elements.ravel()
        vals = np.column_stack([-1.0 / L, 1.0 / L]).ravel()
        return sp.csr_matrix((vals, (rows, cols)), shape=(ne, n_dof))
    p = mesh.nodes[mesh.elements]  # (ne, 3, 2)
    two_a = 2.0 * mesh.volumes
    x, y = p[:, :, 0], p[:, :, 1]
    dndx = (np.roll(y, -1, axis=1) - np.roll(y, -2, axis=1)) / two_a[:, None]
    dndy = (np.roll(x, -2, axis=1) - np.roll(x, -1, axis=1)) / two_a[:, None]
    ux = 2 * mesh.elements
    uy = ux + 1
    e = np.arange(ne)[:, None].repeat(3, axis=1)
    rows = np.concatenate([m * e, m * e + 1, m * e + 2, m * e + 2]).ravel()
    cols = np.concatenate([ux, uy, ux, uy]).ravel()
    vals = np.concatenate([dndx, dndy, dndy, dndx]).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(ne * m, n_dof))


def load_vector(mesh: Mesh, bc: BoundaryData):
    dim = mesh.dim
    F = np.zeros(mesh.n_nodes * dim)
    if bc.body_force is not None:
        bf = np.broadcast_to(np.asarray(bc.body_force, dtype=float), (mesh.n_elements, dim))
        share = bf * (mesh.volumes / (dim + 1))[:, None]
        for k in range(dim + 1):
            for c in range(dim):
                np.add.at(F, dim * mesh.elements[:, k] + c, share[:, c])
    for facet, h in bc.neumann:
        share = np.asarray(h, dtype=float) * mesh.facet_measure(facet) / len(facet)
        for v in facet:
            F[dim * v:dim * v + dim] += share
    return F


class DiscreteConstraintSpace:
    """Assembled constraint set; immutable after construction.

    Attributes
    ----------
    B : sparse, shape (n_elements * m, n_dofs)
    weights : element volumes
    K : stiffness on free dofs, ``B_f^T W C B_f``
    F : full consistent load vector
    lift : full displacement vector carrying the Dirichlet values (zero elsewhere)
    """

    def __init__(self, mesh: Mesh, C: ElasticityTensor, bc: BoundaryData, backend="auto",
                 rtol=1e-12):
        if C.dim != mesh.dim:
            raise ValueError(f"elasticity tensor dim {C.dim} != mesh dim {mesh.dim}")
        bc.validate(mesh)
        self.mesh, self.C, self.bc = mesh, C, bc
        self.m = C.size
        self.n_dofs = mesh.n_nodes * mesh.dim
        self.weights = mesh.volumes.copy()
        self.weights.setflags(write=False)
        self.B = strain_displacement(mesh)
        fixed = sorted(mesh.dim * n + c for n, c in bc.dirichlet)
        self.fixed_dofs = np.array(fixed, dtype=int)
        self.free_dofs = np.setdiff1d(np.arange(self.n_dofs), self.fixed_dofs)
        self.lift = np.zeros(self.n_dofs)
        for (n, c), g in bc.dirichlet.items():
            self.lift[mesh.dim * n + c] = g
        self.F = load_vector(mesh, bc)
        self.B_free = self.B[:, self.free_dofs].tocsr()
        self._WC = sp.kron(sp.diags(self.weights), sp.csr_matrix(C.voigt), format="csr")
        self._W = sp.kron(sp.diags(self.weights), sp.identity(self.m), format="csr")
        self.K = (self.B_free.T @ self._WC @ self.B_free).tocsc()
        self.solver = SPDSolver(self.K, backend=backend, rtol=rtol)
        self._strain_lift = (self.B @ self.lift).reshape(-1, self.m)

    @property
    def dim(self):
        return self.mesh.dim

    @property
    def n_points(self):
        return self.mesh.n_elements

    def field(self, eps, sig) -> StateField:
        return StateField(eps, sig, self.weights, self.C)

    def full_displacement(self, u_free):
        u = self.lift.copy()
        u[self.free_dofs] = u_free
        return u

    def strain_of(self, u):
        return (self.B @ u).reshape(-1, self.m)

    def internal_force(self, sig):
        """``B^T W sig`` on all dofs."""
        return self.B.T @ (self._W @ np.asarray(sig).ravel())

    def _check(self, target: StateField):
        if target.dim != self.dim or len(target) != self.n_points:
            raise ValueError(f"field ({len(target)} points, dim {target.dim}) does not match "
                             f"the space ({self.n_points} points, dim {self.dim})")


def assemble(mesh: Mesh, C: ElasticityTensor, bc: BoundaryData, **kw) -> DiscreteConstraintSpace:
    """Assemble and factorize; raises ``SingularStiffnessError`` on a mechanism."""
    return DiscreteConstraintSpace(mesh, C, bc, **kw)


def _project_strain(space, eps_target):
    rhs = space.B_free.T @ (space._WC @ (np.asarray(eps_target) - space._strain_lift).ravel())
    u = space.full_displacement(space.solver.solve(rhs))
    return space.strain_of(u), u


def _project_stress(space, sig_target, F):
    sig_target = np.asarray(sig_target)
    rhs = F[space.free_dofs] - space.B_free.T @ (space._W @ sig_target.ravel())
    eta = space.solver.solve(rhs)
    d_eps = (space.B_free @ eta).reshape(-1, space.m)
    return sig_target + space.C.apply(d_eps)


def project_onto_E(space: DiscreteConstraintSpace, target: StateField, return_displacement=False):
    """Closest field of the constraint set to ``target`` in the energy metric."""
    space._check(target)
    eps, u = _project_strain(space, target.eps)
    sig = _project_stress(space, target.sig, space.F)
    out = space.field(eps, sig)
    return (out, u) if return_displacement else out


def solve_classical(space: DiscreteConstraintSpace, return_displacement=False):
    """Linear-elastic solution ``sig = C B u`` with ``K u = F`` on free dofs."""
    rhs = space.F[space.free_dofs] - space.B_free.T @ (space._WC @ space._strain_lift.ravel())
    u = space.full_displacement(space.solver.solve(rhs))
    eps = space.strain_of(u)
    out = space.field(eps, space.C.apply(eps))
    return (out, u) if return_displacement else out


def residuals(space: DiscreteConstraintSpace, fld: StateField):
    """``(compat, equil)``: energy distance of the strain to admissible strains,
    and the Euclidean norm of ``B^T W sig - F`` on free dofs."""
    space._check(fld)
    eps_star, _ = _project_strain(space, fld.eps)
    r = fld.eps - eps_star
    compat = np.sqrt(max(0.0, float(space.weights @ (0.5 * np.einsum(
        "ij,ij->i", r, space.C.apply(r))))))
    equil = np.linalg.norm((space.internal_force(fld.sig) - space.F)[space.free_dofs])
    return float(compat), float(equil)


def power_balance(space: DiscreteConstraintSpace, fld: StateField, u):
    """``(internal, external)`` work of a field in the constraint set.

    External work counts the loads on all dofs plus the reactions on the
    fixed dofs times the prescribed displacements.
    """
    internal = float(space.weights @ np.einsum("ij,ij->i", fld.sig, fld.eps))
    reactions = (space.internal_force(fld.sig) - space.F)[space.fixed_dofs]
    external = float(space.F @ u + reactions @ u[space.fixed_dofs])
    return internal, external


def helmholtz_orthogonality_check(space: DiscreteConstraintSpace, n_pairs=50, seed=0):
    """Largest relative weighted contraction between random homogeneous
    admissible strains and self-equilibrated stresses.

    Uses the homogeneous version of the space's boundary data (the stiffness
    only depends on which dofs are fixed).
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    zero_F = np.zeros(space.n_dofs)
    for _ in range(n_pairs):
        e = (space.B_free @ rng.normal(size=space.free_dofs.size)).reshape(-1, space.m)
        s = _project_stress(space, rng.normal(size=(space.n_points, space.m)), zero_F)
        dot = space.weights @ np.einsum("ij,ij->i", s, e)
        # tensor norms: engineering shear counts once per off-diagonal pair
        e_t = e.copy()
        e_t[:, space.dim:] /= np.sqrt(2.0)
        s_t = s.copy()
        s_t[:, space.dim:] *= np.sqrt(2.0)
        scale = np.sqrt((space.weights @ (e_t ** 2).sum(1)) * (space.weights @ (s_t ** 2).sum(1)))
        if scale > 0:
            worst = max(worst, abs(dot) / scale)
    return float(worst)


def energy_sq_distance_to_E(space, fld: StateField) -> float:
    """Squared energy distance of a field to the constraint set."""
    proj = project_onto_E(space, fld)
    return float(space.weights @ sq_norm_density(fld.eps - proj.eps, fld.sig - proj.sig,
                                                 space.C))
