"""On-disk formats: field CSVs, grid sidecars, mesh JSON and PGM heatmaps."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .fields import CartesianGrid2, PointSet2, ScalarSamples, VectorSamples
from .meshkit import CellMesh


def _fmt(v):
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def write_field_csv(path, coords, values, grid: CartesianGrid2 = None):
    """Write ``x,y,v0[,v1[,v2]]`` rows; NaN is spelled ``nan``.

    ``repr`` round-trips doubles exactly, so written fields reload bit-exactly.
    """
    path = Path(path)
    coords = np.asarray(coords, float)
    vals = np.asarray(values, float)
    if vals.ndim == 1:
        vals = vals[:, None]
    header = ["x", "y"] + [f"v{i}" for i in range(vals.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for (x, y), row in zip(coords, vals):
            w.writerow([_fmt(x), _fmt(y)] + [_fmt(v) for v in row])
    if grid is not None:
        write_json(grid_sidecar_path(path), grid.to_json())


def grid_sidecar_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".grid.json")


def read_field_csv(path):
    """Return ``(coords, values, grid_or_None)``; values is (N,) or (N, k)."""
    path = Path(path)
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[:2] != ["x", "y"]:
            raise ValueError(f"{path}: expected header x,y[,v0[,v1[,v2]]], got {header}")
        rows = [[float(v) for v in row] for row in r if row]
    data = np.array(rows, float).reshape(-1, len(header))
    coords, vals = data[:, :2], data[:, 2:]
    if vals.shape[1] == 1:
        vals = vals[:, 0]
    side = grid_sidecar_path(path)
    grid = CartesianGrid2.from_json(read_json(side)) if side.exists() else None
    return coords, vals, grid


def load_scalar(path) -> ScalarSamples:
    coords, vals, grid = read_field_csv(path)
    if vals.ndim != 1:
        raise ValueError(f"{path}: expected one value column")
    valid = np.isfinite(vals)
    pts = PointSet2(coords, valid, grid.points().boundary if grid is not None else None)
    return ScalarSamples(pts, vals, grid)


def load_vector(path) -> VectorSamples:
    coords, vals, grid = read_field_csv(path)
    if vals.ndim != 2:
        raise ValueError(f"{path}: expected 2 or 3 value columns")
    valid = np.all(np.isfinite(vals), axis=1)
    return VectorSamples(PointSet2(coords, valid), vals, grid)


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def save_mesh(path, mesh: CellMesh):
    write_json(path, mesh.to_json())


def load_mesh(path) -> CellMesh:
    return CellMesh.from_json(read_json(path))


def write_pgm(path, image, lo=None, hi=None):
    """8-bit binary PGM of a 2D array (row 0 at the bottom) plus a min/max sidecar."""
    img = np.asarray(image, float)
    finite = np.isfinite(img)
    lo = float(np.nanmin(img)) if lo is None else lo
    hi = float(np.nanmax(img)) if hi is None else hi
    span = hi - lo if hi > lo else 1.0
    q = np.zeros(img.shape, np.uint8)
    q[finite] = np.clip(np.rint(255 * (img[finite] - lo) / span), 0, 255).astype(np.uint8)
    q = q[::-1]
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{q.shape[1]} {q.shape[0]}\n255\n".encode())
        fh.write(q.tobytes())
    write_json(path.with_suffix(".json"), {"min": lo, "max": hi, "width": q.shape[1],
                                           "height": q.shape[0], "nan_value": 0})


def read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], np.uint8).reshape(h, w)[::-1]


def load_points(path):
    """Sample locations of any field CSV, with its grid sidecar if present."""
    coords, vals, grid = read_field_csv(path)
    if grid is not None:
        return grid.points(), grid
    return PointSet2(coords), None
