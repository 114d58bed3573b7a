"""File formats: fields, trajectories, catalogs, reports and plot data.

Binary field blobs start with a 16-byte header

    magic b"YMF1" | uint16 Nx | uint16 Ny | uint8 degree | uint8 dim | 6 pad bytes

(little endian) followed by the array in column-major float64.
"""
import csv
import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from . import functional as fn
from .lattice import TorusGrid

__all__ = [
    "SCHEMA_VERSION",
    "field_to_json",
    "field_from_json",
    "write_field_blob",
    "read_field_blob",
    "save_trajectory",
    "load_trajectory",
    "trajectory_rows",
    "write_csv",
    "catalog_to_json",
    "complex_to_json",
    "complex_to_dot",
    "to_jsonable",
    "write_report",
    "load_report",
    "config_hash",
]

SCHEMA_VERSION = "1.0"
_MAGIC = b"YMF1"
_HEADER = struct.Struct("<4sHHBB6x")
_GROUPS = {1: "u1", 3: "su2"}


def _group(dim):
    return _GROUPS[int(dim)]


def field_to_json(grid, arr, degree):
    """Flat JSON form ``{group, Nx, Ny, degree, data}`` (row-major data)."""
    arr = np.asarray(arr, float)
    return {"group": _group(arr.shape[-1]), "Nx": grid.Nx, "Ny": grid.Ny, "degree": int(degree),
            "data": arr.ravel().tolist()}


def _field_shape(Nx, Ny, degree, dim):
    return (2, Nx, Ny, dim) if degree == 1 else (Nx, Ny, dim)


def field_from_json(d):
    dim = 1 if d["group"] == "u1" else 3
    return np.asarray(d["data"], float).reshape(_field_shape(d["Nx"], d["Ny"], d["degree"], dim))


def write_field_blob(path, arr, degree):
    arr = np.asarray(arr, float)
    Nx, Ny = arr.shape[-3], arr.shape[-2]
    with open(path, "wb") as f:
        f.write(_HEADER.pack(_MAGIC, Nx, Ny, int(degree), arr.shape[-1]))
        f.write(np.asfortranarray(arr).tobytes(order="F"))


def read_field_blob(path):
    """Returns ``(array, degree)``."""
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        magic, Nx, Ny, degree, dim = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a field blob")
        shape = _field_shape(Nx, Ny, degree, dim)
        data = np.frombuffer(f.read(), dtype="<f8")
    if data.size != np.prod(shape):
        raise ValueError(f"{path}: expected {np.prod(shape)} values, found {data.size}")
    return data.reshape(shape, order="F").copy(), degree


# -- trajectories ----------------------------------------------------------------
def trajectory_rows(path, pert=None):
    """Rows ``(s, action, energy density integral, residual)`` per slice.

    The residual of a slice is the max-norm of the centered flow residual
    ``d/ds (A, omega) + grad`` with the gauge terms, one-sided at the ends.
    """
    from .critical import stationary_residual, _pack

    grid = path.grid
    Y = path.vectors()
    rows = []
    for m in range(path.M):
        c = path.config(m)
        lo, hi = max(m - 1, 0), min(m + 1, path.M - 1)
        dy = (Y[hi] - Y[lo]) / (path.s[hi] - path.s[lo])
        V = stationary_residual(c, path.Psi[m], pert, c)
        n = len(V)
        r = dy[:n] + V
        area = grid.site_weight(0)
        P = path.Psi[m]
        dA = (path.A[hi] - path.A[lo]) / (path.s[hi] - path.s[lo])
        dw = (path.omega[hi] - path.omega[lo]) / (path.s[hi] - path.s[lo])
        e = float(np.sum(area * fn.energyDensity(c, pert, P, dA, dw)))
        # the gauge row is not a flow equation; drop it
        k = grid.size(1, path.dim) + grid.size(0, path.dim)
        rows.append((float(path.s[m]), float(fn.action(c, pert)), e, float(np.max(np.abs(r[:k])))))
    return rows


def save_trajectory(directory, path, pert=None, name="trajectory"):
    """Write a JSON manifest plus one blob per field and slice; returns the manifest path."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    slices = []
    for m in range(path.M):
        ent = {}
        for key, arr, deg in (("A", path.A[m], 1), ("omega", path.omega[m], 0), ("Psi", path.Psi[m], 0)):
            fname = f"{name}_{m:04d}_{key}.bin"
            write_field_blob(d / fname, arr, deg)
            ent[key] = fname
        slices.append(ent)
    man = {
        "schema_version": SCHEMA_VERSION,
        "kind": "trajectory",
        "grid": path.grid.to_dict(),
        "group": _group(path.dim),
        "perturbation": None if pert is None else pert.to_dict(),
        "s": path.s.tolist(),
        "endpoint_ids": list(path.endpoint_ids),
        "residual": float(path.residual),
        "slices": slices,
        "diagnostics": f"{name}_diagnostics.csv",
    }
    write_csv(d / man["diagnostics"], ["s", "action", "energy_density_integral", "residual"],
              trajectory_rows(path, pert))
    out = d / f"{name}.json"
    out.write_text(json.dumps(man, indent=1, sort_keys=True))
    return out


def load_trajectory(manifest):
    from .flow import TemporalPath

    manifest = Path(manifest)
    man = json.loads(manifest.read_text())
    grid = TorusGrid.from_dict(man["grid"])
    base = manifest.parent
    A = np.array([read_field_blob(base / e["A"])[0] for e in man["slices"]])
    W = np.array([read_field_blob(base / e["omega"])[0] for e in man["slices"]])
    P = np.array([read_field_blob(base / e["Psi"])[0] for e in man["slices"]])
    return TemporalPath(grid, np.asarray(man["s"]), A, W, P,
                        endpoint_ids=tuple(man["endpoint_ids"]), residual=man["residual"])


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


# -- catalogs and complexes -------------------------------------------------------------
def catalog_to_json(catalog, pert=None, fields=False):
    pts = []
    for c in catalog:
        ent = c.to_dict()
        if fields:
            ent["A"] = field_to_json(c.cfg.grid, c.cfg.A, 1)
            ent["omega"] = field_to_json(c.cfg.grid, c.cfg.omega, 0)
        pts.append(ent)
    first = catalog.points[0].cfg if len(catalog) else None
    return {
        "group": None if first is None else first.group,
        "grid": None if first is None else first.grid.to_dict(),
        "perturbation_hash": None if pert is None else pert.digest(),
        "level": catalog.level,
        "regular": catalog.regular,
        "flags": catalog.flags,
        "points": pts,
    }


def complex_to_json(cx, betti=None):
    return {
        "level": cx.level,
        "generators": {str(k): v for k, v in cx.generators.items()},
        "boundary": {str(k): np.asarray(m).tolist() for k, m in cx.boundary.items()},
        "partial": cx.partial,
        "flags": cx.flags,
        "betti": None if betti is None else {str(k): v for k, v in betti.items()},
    }


def complex_to_dot(cx, catalog):
    """Flow category as a DOT graph: generators as nodes, mod-2 counts on edges."""
    lines = ["digraph flow {", "  rankdir=TB;"]
    for c in catalog:
        lines.append(f'  g{c.id} [label="{c.id}: index {c.morse_index}\\naction {c.value:.6g}"];')
    for k, m in sorted(cx.boundary.items()):
        for j, src in enumerate(cx.generators[k]):
            for i, tgt in enumerate(cx.generators[k - 1]):
                raw = None
                for r in cx.counts.get(k, []):
                    if r["source"] == src and r["target"] == tgt:
                        raw = r["count"]
                lab = f"{int(m[i, j])}" if raw is None else f"{int(m[i, j])} ({raw})"
                lines.append(f'  g{src} -> g{tgt} [label="{lab}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- reports -------------------------------------------------------------------------
def to_jsonable(x):
    """Recursively convert numpy values and tuples to plain JSON types."""
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if np.isfinite(v) else repr(v)
    return x


def config_hash(text):
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def write_report(path, report):
    """Schema-versioned JSON, sorted keys for byte-stable output."""
    body = {"schema_version": SCHEMA_VERSION, **to_jsonable(report)}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(body, indent=1, sort_keys=True) + "\n")
    return path


def load_report(path):
    d = json.loads(Path(path).read_text())
    v = d.get("schema_version")
    if v is None or v.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
        raise ValueError(f"unsupported report schema {v!r}")
    return d


def default_out_dir():
    return os.environ.get("YMLAB_OUT_DIR", "ymlab-out")
