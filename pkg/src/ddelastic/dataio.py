"""CSV/JSON persistence: point clouds, state fields and atomic file writes.

CSV columns hold tensor components (``eps_12`` is the tensor shear, not the
engineering one) written with 17 significant digits.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .datasets import PointCloudDataSet
from .tensors import ElasticityTensor, shear_factor, voigt_pairs

FLOAT_FMT = "{:.17g}"


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def fmt(x):
    return FLOAT_FMT.format(float(x))


def write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    atomic_write_text(path, buf.getvalue())


def component_names(prefix, dim):
    return [f"{prefix}_{i + 1}{j + 1}" for i, j in voigt_pairs(dim)]


def state_header(dim):
    return component_names("eps", dim) + component_names("sig", dim)


def states_to_rows(eps_v, sig_v):
    """Voigt arrays -> rows of tensor components."""
    dim = {1: 1, 3: 2, 6: 3}[eps_v.shape[1]]
    return np.hstack([eps_v / shear_factor(dim), sig_v])


def read_state_csv(path):
    """Read states from CSV; returns ``(eps_v, sig_v, extra_columns, header)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    header = [h.strip() for h in rows[0]]
    eps_cols = [i for i, h in enumerate(header) if h.startswith("eps_")]
    sig_cols = [i for i, h in enumerate(header) if h.startswith("sig_")]
    m = len(eps_cols)
    if m == 0 or m != len(sig_cols) or m not in (1, 3, 6):
        raise ValueError(f"{path}: header must name matching eps_/sig_ components")
    dim = {1: 1, 3: 2, 6: 3}[m]
    if [header[i] for i in eps_cols] != component_names("eps", dim) or \
            [header[i] for i in sig_cols] != component_names("sig", dim):
        raise ValueError(f"{path}: expected columns {state_header(dim)}")
    data = [r for r in rows[1:] if r]
    vals = np.array([[float(r[i]) for i in eps_cols + sig_cols] for r in data]).reshape(-1, 2 * m)
    eps_v = vals[:, :m] * shear_factor(dim)
    sig_v = vals[:, m:]
    extra = [i for i in range(len(header)) if i not in eps_cols + sig_cols]
    extra_cols = {header[i]: [r[i] for r in data] for i in extra}
    return eps_v, sig_v, extra_cols, header


def save_point_cloud(cloud: PointCloudDataSet, path):
    """Write ``path`` (CSV) and ``path`` with ``.json`` suffix (sidecar)."""
    path = Path(path)
    write_csv(path, state_header(cloud.dim), states_to_rows(cloud.eps, cloud.sig).tolist())
    write_json(path.with_suffix(".json"), {
        "dim": cloud.dim,
        "metric_voigt": cloud.metric.voigt.tolist(),
        "provenance": cloud.provenance,
    })


def load_point_cloud(path, metric: ElasticityTensor | None = None) -> PointCloudDataSet:
    path = Path(path)
    eps_v, sig_v, _, _ = read_state_csv(path)
    sidecar = path.with_suffix(".json")
    provenance = {}
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        provenance = meta.get("provenance", {})
        if metric is None:
            metric = ElasticityTensor(meta["metric_voigt"])
    if metric is None:
        raise ValueError(f"{path}: no metric given and no JSON sidecar found")
    return PointCloudDataSet(eps_v, sig_v, metric, provenance)
