"""Mesh and field files, JSON reports and CSV tables.

Mesh files are comma-separated text, one row per node holding the point,
the normal and the weight, under a header ``# n=<dim> bounded=<0|1>
label=<string>``.  Field dumps append value columns.  Floats are written
with 17 significant digits so a save/load round trip is bit-exact.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from .geometry import BoundaryMesh, GeometryError


class MeshFileError(ValueError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def mesh_to_text(mesh: BoundaryMesh, values=None) -> str:
    """Serialize a mesh, optionally with field columns (1d or 2d ``values``)."""
    lines = [f"# n={mesh.n} bounded={int(mesh.bounded)} label={mesh.label}"]
    cols = [mesh.nodes, mesh.normals, mesh.weights[:, None]]
    if values is not None:
        v = np.asarray(values, dtype=float)
        v = v[:, None] if v.ndim == 1 else v.reshape(v.shape[0], -1)
        if v.shape[0] != mesh.N:
            raise MeshFileError(f"field has {v.shape[0]} rows, mesh has {mesh.N} nodes")
        cols.append(v)
    table = np.concatenate(cols, axis=1)
    lines += [",".join(_fmt(x) for x in row) for row in table]
    return "\n".join(lines) + "\n"


def save_mesh(mesh: BoundaryMesh, path, values=None) -> Path:
    path = Path(path)
    path.write_text(mesh_to_text(mesh, values))
    return path


def _parse_header(line: str) -> dict:
    if not line.startswith("#"):
        raise MeshFileError("missing '# n=... bounded=... label=...' header")
    body = line[1:].strip()
    out = {}
    for key in ("n", "bounded"):
        prefix = key + "="
        if not body.startswith(prefix):
            raise MeshFileError(f"header field {key!r} missing or out of order")
        val, _, body = body[len(prefix):].partition(" ")
        out[key] = val
        body = body.lstrip()
    if not body.startswith("label="):
        raise MeshFileError("header field 'label' missing")
    out["label"] = body[len("label="):]
    try:
        n = int(out["n"])
    except ValueError as exc:
        raise MeshFileError(f"bad dimension {out['n']!r}") from exc
    if out["bounded"] not in ("0", "1"):
        raise MeshFileError(f"bounded must be 0 or 1, got {out['bounded']!r}")
    return {"n": n, "bounded": out["bounded"] == "1", "label": out["label"]}


def mesh_from_text(text: str) -> tuple[BoundaryMesh, np.ndarray | None]:
    """Parse mesh text; returns ``(mesh, values)`` with ``values`` None for plain meshes.

    The loaded mesh carries nodes, normals and weights only (no curve
    parametrization).
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MeshFileError("empty mesh file")
    head = _parse_header(lines[0])
    n = head["n"]
    try:
        rows = [[float(x) for x in ln.split(",")] for ln in lines[1:]]
    except ValueError as exc:
        raise MeshFileError(f"non-numeric entry: {exc}") from exc
    if not rows:
        raise MeshFileError("mesh file has no nodes")
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise MeshFileError("rows have differing column counts")
    data = np.array(rows)
    base = 2 * n + 1
    if data.shape[1] < base:
        raise MeshFileError(f"need at least {base} columns for n={n}, got {data.shape[1]}")
    try:
        mesh = BoundaryMesh(n=n, nodes=data[:, :n], normals=data[:, n:2 * n],
                            weights=data[:, 2 * n], label=head["label"],
                            bounded=head["bounded"], smooth=False)
    except GeometryError as exc:
        raise MeshFileError(str(exc)) from exc
    values = data[:, base:] if data.shape[1] > base else None
    return mesh, values


def load_mesh(path) -> tuple[BoundaryMesh, np.ndarray | None]:
    return mesh_from_text(Path(path).read_text())


def mesh_summary(mesh: BoundaryMesh) -> dict:
    """Counts and closure checks for ``mesh inspect``."""
    closure = np.abs((mesh.weights[:, None] * mesh.normals).sum(axis=0)).max()
    return {"label": mesh.label, "n": mesh.n, "N": mesh.N, "bounded": mesh.bounded,
            "total_measure": mesh.total_measure,
            "normal_closure": float(closure),
            "max_normal_defect": float(np.abs(np.linalg.norm(mesh.normals, axis=1) - 1).max()),
            "min_weight": float(mesh.weights.min()), "max_weight": float(mesh.weights.max())}


# ----------------------------------------------------------------- reports


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and tuples to JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def dumps_json(obj) -> str:
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def config_hash(config: dict) -> str:
    canon = json.dumps(to_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def rows_to_csv(rows: list[dict]) -> str:
    """CSV text with the union of row keys as header (first-seen order)."""
    keys: list[str] = []
    for r in rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _csv_cell(r.get(k)) for k in keys})
    return buf.getvalue()


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return _fmt(v)
    if isinstance(v, (dict, list, tuple)):
        return json.dumps(to_jsonable(v), sort_keys=True)
    return v
