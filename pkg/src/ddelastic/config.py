"""JSON experiment configuration.

Physical parameters have no defaults; only solver knobs do. Every error
names the offending key as a dotted path.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .constraint import BoundaryData, BoundaryDataError, assemble
from .datasets import FlagDataSet1D, TwoWellDataSet, linear_graph
from .mesh import MeshError, bar, read_mesh, rect_crossed
from .sampling import SamplingSpec
from .solver import SolverConfig
from .tensors import ElasticityTensor, SymMatrix


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


def _get(d, key, path, kind=None):
    if not isinstance(d, dict):
        raise ConfigError(path or "<root>", "expected an object")
    if key not in d:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
    val = d[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"{path}.{key}" if path else key,
                          f"expected {getattr(kind, '__name__', kind)}, got {type(val).__name__}")
    return val


def _number(d, key, path):
    val = _get(d, key, path)
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not np.isfinite(val):
        raise ConfigError(f"{path}.{key}", "expected a finite number")
    return float(val)


def _wrap(path, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError, MeshError, BoundaryDataError) as exc:
        raise ConfigError(path, str(exc)) from None


def parse_stiffness(val, path) -> ElasticityTensor:
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        return _wrap(path, ElasticityTensor.scalar, val)
    return _wrap(path, ElasticityTensor, np.asarray(val, dtype=float))


def parse_sym(val, path, dim) -> SymMatrix:
    arr = np.atleast_2d(np.asarray(val, dtype=float)) if not isinstance(val, str) else None
    if arr is None or arr.shape != (dim, dim):
        raise ConfigError(path, f"expected a {dim}x{dim} matrix")
    return _wrap(path, SymMatrix.from_matrix, arr)


def build_mesh(problem, base: Path, path="problem"):
    kind = _get(problem, "type", path, str)
    if kind == "bar1d":
        n = _get(problem, "n_elements", path, int)
        return _wrap(f"{path}.n_elements", bar, _number(problem, "length", path), n)
    if kind == "rect2d":
        return _wrap(path, rect_crossed, _number(problem, "lx", path), _number(problem, "ly", path),
                     _get(problem, "nx", path, int), _get(problem, "ny", path, int))
    if kind == "mesh":
        file = base / _get(problem, "path", path, str)
        if not file.exists():
            raise ConfigError(f"{path}.path", f"file not found: {file}")
        return _wrap(f"{path}.path", read_mesh, file)
    raise ConfigError(f"{path}.type", f"unknown problem type {kind!r}")


def build_material(material, base: Path, dim, path="material"):
    """Return ``(data_set, C)``."""
    from .dataio import load_point_cloud

    kind = _get(material, "type", path, str)
    if kind == "linear":
        C = parse_stiffness(_get(material, "C", path), f"{path}.C")
        return linear_graph(C), C
    if kind == "two_well":
        C = parse_stiffness(_get(material, "C", path), f"{path}.C")
        a = parse_sym(_get(material, "a", path), f"{path}.a", C.dim)
        b = parse_sym(_get(material, "b", path), f"{path}.b", C.dim)
        w = _number(material, "w", path)
        return _wrap(path, TwoWellDataSet, C, a, b, w), C
    if kind == "flag":
        if dim != 1:
            raise ConfigError(f"{path}.type", "the flag set is one-dimensional")
        ds = _wrap(path, FlagDataSet1D, _number(material, "C", path),
                   _number(material, "sigma0", path))
        return ds, ds.metric
    if kind == "point_cloud":
        file = base / _get(material, "path", path, str)
        if not file.exists():
            raise ConfigError(f"{path}.path", f"file not found: {file}")
        C = None
        if "C" in material:
            C = parse_stiffness(material["C"], f"{path}.C")
        cloud = _wrap(f"{path}.path", load_point_cloud, file, C)
        return cloud, cloud.metric
    raise ConfigError(f"{path}.type", f"unknown material type {kind!r}")


def build_boundary(boundary, mesh, path="boundary"):
    fixed = []
    for i, item in enumerate(_get(boundary, "dirichlet", path, list)):
        p = f"{path}.dirichlet[{i}]"
        fixed.append((_get(item, "set", p), _get(item, "components", p),
                      _get(item, "value", p)))
    tractions = []
    for i, item in enumerate(boundary.get("tractions", [])):
        p = f"{path}.tractions[{i}]"
        tractions.append((_get(item, "set", p), _get(item, "vector", p, list)))
    body = boundary.get("body_force")
    bc = _wrap(path, BoundaryData.build, mesh, fixed, tractions,
               None if body is None else np.asarray(body, dtype=float))
    _wrap(path, bc.validate, mesh)
    return bc


def build_solver(solver, path="solver"):
    solver = solver or {}
    known = {"max_iters", "tol", "atol", "init", "seed", "n_starts"}
    for key in solver:
        if key not in known:
            raise ConfigError(f"{path}.{key}", "unknown solver option")
    return _wrap(path, SolverConfig, **solver)


def build_sampling(specs, path="sampling"):
    if not isinstance(specs, list):
        raise ConfigError(path, "expected a list of sampling specs")
    out = []
    for i, s in enumerate(specs):
        p = f"{path}[{i}]"
        out.append(_wrap(p, SamplingSpec, _number(s, "rho", p), float(s.get("t", 0.0)),
                         _get(s, "box", p, list), int(s.get("seed", 0))))
    return out


@dataclass
class ExperimentConfig:
    raw: dict
    mesh: Any
    dataset: Any
    C: ElasticityTensor
    bc: BoundaryData
    solver: SolverConfig
    sampling: Optional[list]
    output: Optional[str]
    base: Path

    def space(self):
        from .linalg import SingularStiffnessError

        try:
            return assemble(self.mesh, self.C, self.bc)
        except SingularStiffnessError as exc:
            raise ConfigError("boundary", f"{exc}; constrain the body further") from None

    def echo(self):
        return copy.deepcopy(self.raw)


def parse_config(raw: dict, base: Path = Path("."), seed: Optional[int] = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    raw = copy.deepcopy(raw)
    known = {"problem", "material", "boundary", "solver", "sampling", "output"}
    for key in raw:
        if key not in known:
            raise ConfigError(key, "unknown top-level key")
    if seed is not None:
        raw.setdefault("solver", {})["seed"] = int(seed)
    mesh = build_mesh(_get(raw, "problem", ""), base)
    dataset, C = build_material(_get(raw, "material", ""), base, mesh.dim)
    if C.dim != mesh.dim:
        raise ConfigError("material.C", f"dimension {C.dim} does not match the mesh ({mesh.dim})")
    bc = build_boundary(_get(raw, "boundary", ""), mesh)
    solver = build_solver(raw.get("solver"))
    sampling = build_sampling(raw["sampling"]) if "sampling" in raw else None
    output = raw.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output", "expected a directory path")
    return ExperimentConfig(raw, mesh, dataset, C, bc, solver, sampling, output, base)


def load_config(path, seed: Optional[int] = None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("--config", f"file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON ({exc})") from None
    return parse_config(raw, path.parent, seed)


def load_json_object(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError("--config", f"file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    return raw
