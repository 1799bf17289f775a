"""Simplicial meshes (segments in 1D, triangles in 2D), generators and a text format.

Mesh file layout::

    dim n_nodes n_elems
    <n_nodes lines of coordinates>
    <n_elems lines of 0-based connectivity>
    <optional lines "name node node ..." defining boundary node sets>
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class MeshError(ValueError):
    pass


class Mesh:
    def __init__(self, nodes, elements, node_sets=None):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        elements = np.array(elements, dtype=int, ndmin=2)
        self.dim = nodes.shape[1]
        if self.dim not in (1, 2):
            raise MeshError(f"only 1D and 2D meshes are supported, got dim {self.dim}")
        if elements.shape[1] != self.dim + 1:
            raise MeshError(f"{self.dim}D elements need {self.dim + 1} nodes")
        if elements.min() < 0 or elements.max() >= len(nodes):
            raise MeshError("connectivity references a missing node")
        signed = self._signed_volumes(nodes, elements)
        if np.any(np.abs(signed) <= 1e-14 * max(1.0, np.abs(nodes).max()) ** self.dim):
            raise MeshError("mesh has degenerate elements")
        flip = signed < 0
        if np.any(flip):
            elements = elements.copy()
            elements[flip, :2] = elements[flip, 1::-1]
        self.nodes = nodes
        self.elements = elements
        self.volumes = np.abs(signed)
        self.node_sets = {k: np.asarray(v, dtype=int) for k, v in (node_sets or {}).items()}
        self._check_connected()

    @staticmethod
    def _signed_volumes(nodes, elements):
        p = nodes[elements]
        if nodes.shape[1] == 1:
            return p[:, 1, 0] - p[:, 0, 0]
        a, b = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])

    def _check_connected(self):
        n = len(self.nodes)
        used = np.unique(self.elements)
        if used.size != n:
            raise MeshError("mesh has nodes not attached to any element")
        rows = np.repeat(self.elements, self.dim + 1, axis=1).ravel()
        cols = np.tile(self.elements, self.dim + 1).ravel()
        graph = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
        if connected_components(graph, directed=False)[0] != 1:
            raise MeshError("mesh is not connected")

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def centroids(self):
        return self.nodes[self.elements].mean(axis=1)

    def boundary_facets(self):
        """Facets owned by exactly one element: nodes (1D) or edges (2D), as tuples."""
        if self.dim == 1:
            counts = np.bincount(self.elements.ravel(), minlength=self.n_nodes)
            return [(int(i),) for i in np.flatnonzero(counts == 1)]
        edges = np.vstack([self.elements[:, [0, 1]], self.elements[:, [1, 2]],
                           self.elements[:, [2, 0]]])
        key = np.sort(edges, axis=1)
        uniq, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        once = counts[inv.ravel()] == 1
        return [tuple(int(v) for v in e) for e in edges[once]]

    def facets_on(self, node_set):
        """Boundary facets with every node in ``node_set`` (name or indices)."""
        ids = self.node_set(node_set)
        members = set(ids.tolist())
        return [f for f in self.boundary_facets() if all(v in members for v in f)]

    def node_set(self, spec):
        if isinstance(spec, str):
            try:
                return self.node_sets[spec]
            except KeyError:
                raise MeshError(f"unknown node set {spec!r}; known: {sorted(self.node_sets)}") \
                    from None
        return np.asarray(spec, dtype=int)

    def facet_measure(self, facet):
        if len(facet) == 1:
            return 1.0
        a, b = self.nodes[list(facet)]
        return float(np.linalg.norm(b - a))


def bar(length=1.0, n_elements=10):
    """Uniform 1D bar on ``[0, length]`` with node sets ``left`` and ``right``."""
    if n_elements < 1:
        raise MeshError("a bar needs at least one element")
    x = np.linspace(0.0, length, n_elements + 1)
    elements = np.column_stack([np.arange(n_elements), np.arange(1, n_elements + 1)])
    return Mesh(x[:, None], elements, {"left": [0], "right": [n_elements]})


def rect_crossed(lx=1.0, ly=1.0, nx=4, ny=4):
    """Structured rectangle; each cell is split into four triangles at its center.

    Node sets ``left``, ``right``, ``bottom`` and ``top`` hold the corner-grid
    nodes on each side.
    """
    if nx < 1 or ny < 1:
        raise MeshError("need at least one cell per direction")
    xs, ys = np.linspace(0, lx, nx + 1), np.linspace(0, ly, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    corners = np.column_stack([gx.ravel(), gy.ravel()])
    cx, cy = np.meshgrid(0.5 * (xs[1:] + xs[:-1]), 0.5 * (ys[1:] + ys[:-1]), indexing="ij")
    centers = np.column_stack([cx.ravel(), cy.ravel()])
    nodes = np.vstack([corners, centers])

    def cid(i, j):
        return i * (ny + 1) + j

    elements = []
    offset = len(corners)
    for i in range(nx):
        for j in range(ny):
            c = offset + i * ny + j
            a, b, d, e = cid(i, j), cid(i + 1, j), cid(i + 1, j + 1), cid(i, j + 1)
            elements += [(a, b, c), (b, d, c), (d, e, c), (e, a, c)]
    tol = 1e-12 * max(lx, ly)
    sets = {
        "left": np.flatnonzero(np.abs(corners[:, 0]) < tol),
        "right": np.flatnonzero(np.abs(corners[:, 0] - lx) < tol),
        "bottom": np.flatnonzero(np.abs(corners[:, 1]) < tol),
        "top": np.flatnonzero(np.abs(corners[:, 1] - ly) < tol),
    }
    return Mesh(nodes, elements, sets)


def read_mesh(path):
    lines = [ln.split("#")[0].split() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    try:
        dim, n_nodes, n_elems = (int(v) for v in lines[0])
        nodes = np.array([[float(v) for v in ln] for ln in lines[1:1 + n_nodes]])
        elements = np.array([[int(v) for v in ln]
                             for ln in lines[1 + n_nodes:1 + n_nodes + n_elems]], dtype=int)
    except (ValueError, IndexError) as exc:
        raise MeshError(f"{path}: malformed mesh file ({exc})") from None
    if nodes.shape != (n_nodes, dim) or elements.shape != (n_elems, dim + 1):
        raise MeshError(f"{path}: counts in header do not match the data")
    sets = {ln[0]: [int(v) for v in ln[1:]] for ln in lines[1 + n_nodes + n_elems:]}
    return Mesh(nodes, elements, sets)


def write_mesh(mesh: Mesh, path):
    from .dataio import atomic_write_text, fmt

    out = [f"{mesh.dim} {mesh.n_nodes} {mesh.n_elements}"]
    out += [" ".join(fmt(v) for v in row) for row in mesh.nodes]
    out += [" ".join(str(int(v)) for v in row) for row in mesh.elements]
    out += [" ".join([name] + [str(int(v)) for v in ids]) for name, ids in mesh.node_sets.items()]
    atomic_write_text(path, "\n".join(out) + "\n")
