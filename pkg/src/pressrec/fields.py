"""Point sets, uniform grids and sampled fields.

Everything here is double precision and immutable once built; the arrays
held by the containers are flagged read-only so they can be shared freely
between solvers. Missing data is spelled NaN.

Grid fields are stored row-major with y varying slowest: the sample at
column ``i`` and row ``j`` lives at flat index ``j * nx + i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import OutOfDomainError, ShapeError


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PointSet2:
    """Scattered 2D sample locations with a validity mask.

    ``boundary`` optionally flags points known to lie on the domain boundary
    (lattice perimeter or convex-hull vertices).
    """

    coords: np.ndarray
    valid: np.ndarray = None
    boundary: Optional[np.ndarray] = None

    def __post_init__(self):
        coords = _frozen(self.coords).reshape(-1, 2)
        if not np.all(np.isfinite(coords)):
            raise ShapeError("point coordinates must be finite")
        valid = np.ones(len(coords), bool) if self.valid is None else self.valid
        valid = _frozen(valid, bool).reshape(-1)
        if len(valid) != len(coords):
            raise ShapeError(f"mask length {len(valid)} != point count {len(coords)}")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "valid", valid)
        if self.boundary is not None:
            b = _frozen(self.boundary, bool).reshape(-1)
            if len(b) != len(coords):
                raise ShapeError("boundary flag length does not match point count")
            object.__setattr__(self, "boundary", b)

    def __len__(self):
        return len(self.coords)

    @property
    def x(self):
        return self.coords[:, 0]

    @property
    def y(self):
        return self.coords[:, 1]

    def with_valid(self, valid):
        return PointSet2(self.coords, valid, self.boundary)


@dataclass(frozen=True)
class CartesianGrid2:
    nx: int
    ny: int
    h: float
    origin: tuple = (0.0, 0.0)
    periodic: bool = False

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ShapeError(f"grid needs at least 3x3 nodes, got {self.nx}x{self.ny}")
        if not self.h > 0:
            raise ShapeError(f"grid spacing must be positive, got {self.h}")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "h", float(self.h))

    @property
    def shape(self):
        """Array shape ``(ny, nx)`` of a reshaped scalar field."""
        return (self.ny, self.nx)

    @property
    def size(self):
        return self.nx * self.ny

    @property
    def xs(self):
        return self.origin[0] + self.h * np.arange(self.nx)

    @property
    def ys(self):
        return self.origin[1] + self.h * np.arange(self.ny)

    @property
    def extent(self):
        """Physical side lengths. Periodic grids span ``n*h``, others ``(n-1)*h``."""
        if self.periodic:
            return (self.nx * self.h, self.ny * self.h)
        return ((self.nx - 1) * self.h, (self.ny - 1) * self.h)

    def points(self) -> PointSet2:
        X, Y = np.meshgrid(self.xs, self.ys)
        coords = np.column_stack([X.ravel(), Y.ravel()])
        edge = np.zeros(self.shape, bool)
        edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
        return PointSet2(coords, boundary=edge.ravel())

    def to_json(self):
        return {"nx": self.nx, "ny": self.ny, "h": self.h,
                "origin": list(self.origin), "periodic": self.periodic}

    @classmethod
    def from_json(cls, d):
        return cls(int(d["nx"]), int(d["ny"]), float(d["h"]),
                   tuple(d.get("origin", (0.0, 0.0))), bool(d.get("periodic", False)))


@dataclass(frozen=True, eq=False)
class ScalarSamples:
    points: PointSet2
    values: np.ndarray
    grid: Optional[CartesianGrid2] = field(default=None)

    def __post_init__(self):
        v = _frozen(self.values).reshape(-1)
        if len(v) != len(self.points):
            raise ShapeError(f"{len(v)} values for {len(self.points)} points")
        object.__setattr__(self, "values", v)
        _check_grid(self.grid, self.points)

    def __len__(self):
        return len(self.values)

    def as_grid(self):
        if self.grid is None:
            raise ShapeError("samples are not attached to a grid")
        return self.values.reshape(self.grid.shape)


@dataclass(frozen=True, eq=False)
class VectorSamples:
    """Per-point vectors with 2 or 3 components (``values`` has shape (N, k))."""

    points: PointSet2
    values: np.ndarray
    grid: Optional[CartesianGrid2] = field(default=None)

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2 or v.shape[1] not in (2, 3) or len(v) != len(self.points):
            raise ShapeError(f"vector values of shape {v.shape} do not fit {len(self.points)} points")
        object.__setattr__(self, "values", v)
        _check_grid(self.grid, self.points)

    def __len__(self):
        return len(self.values)

    @property
    def ncomp(self):
        return self.values.shape[1]

    def component(self, k) -> ScalarSamples:
        return ScalarSamples(self.points, self.values[:, k], self.grid)

    def as_grid(self):
        if self.grid is None:
            raise ShapeError("samples are not attached to a grid")
        return self.values.reshape(self.grid.ny, self.grid.nx, self.ncomp)

    @property
    def usable(self):
        """Points that are valid and carry finite data."""
        return self.points.valid & np.all(np.isfinite(self.values), axis=1)


# a pressure-gradient sample set has exactly the vector-sample layout
GradientField = VectorSamples


def _check_grid(grid, points):
    if grid is not None and grid.size != len(points):
        raise ShapeError(f"grid of {grid.size} nodes does not match {len(points)} points")


def grid_scalar(grid: CartesianGrid2, values) -> ScalarSamples:
    return ScalarSamples(grid.points(), np.asarray(values, float).reshape(-1), grid)


def grid_vector(grid: CartesianGrid2, values) -> VectorSamples:
    v = np.asarray(values, float)
    return VectorSamples(grid.points(), v.reshape(grid.size, v.shape[-1]), grid)


def bilinear_resample(field: ScalarSamples, targets: PointSet2) -> ScalarSamples:
    """Interpolate a grid field onto scattered targets, one cell at a time.

    Targets on grid nodes return the node value bit-exactly.
    """
    grid = field.grid
    if grid is None:
        raise ShapeError("bilinear_resample needs a field attached to a CartesianGrid2")
    F = field.as_grid()
    # fractional index coordinates
    s = (targets.x - grid.origin[0]) / grid.h
    t = (targets.y - grid.origin[1]) / grid.h
    tol = 1e-9
    outside = (s < -tol) | (s > grid.nx - 1 + tol) | (t < -tol) | (t > grid.ny - 1 + tol)
    if outside.any():
        k = int(np.flatnonzero(outside)[0])
        raise OutOfDomainError(k, targets.coords[k])
    # snap round-off in (x - origin) / h onto the node it came from
    s = np.where(np.abs(s - np.rint(s)) <= tol, np.rint(s), s)
    t = np.where(np.abs(t - np.rint(t)) <= tol, np.rint(t), t)
    s = np.clip(s, 0, grid.nx - 1)
    t = np.clip(t, 0, grid.ny - 1)
    i0 = np.minimum(np.floor(s).astype(int), grid.nx - 2)
    j0 = np.minimum(np.floor(t).astype(int), grid.ny - 2)
    fs = s - i0
    ft = t - j0
    f00 = F[j0, i0]
    f10 = F[j0, i0 + 1]
    f01 = F[j0 + 1, i0]
    f11 = F[j0 + 1, i0 + 1]
    out = (1 - fs) * (1 - ft) * f00 + fs * (1 - ft) * f10 + (1 - fs) * ft * f01 + fs * ft * f11
    # exact node hits: avoid 0*NaN and rounding in the weighted sum
    on_node = np.isin(fs, (0.0, 1.0)) & np.isin(ft, (0.0, 1.0))
    if on_node.any():
        out[on_node] = F[j0[on_node] + ft[on_node].astype(int), i0[on_node] + fs[on_node].astype(int)]
    return ScalarSamples(targets, out)


def mask_void_region(samples: VectorSamples, predicate: Callable) -> VectorSamples:
    """Invalidate points where ``predicate(x, y)`` holds and blank their values.

    ``predicate`` receives coordinate arrays and returns a boolean array.
    """
    pts = samples.points
    hit = np.asarray(predicate(pts.x, pts.y), bool)
    hit = np.broadcast_to(hit, (len(pts),))
    values = np.array(samples.values, copy=True)
    values[hit] = np.nan
    return VectorSamples(pts.with_valid(pts.valid & ~hit), values, samples.grid)


def disk_predicate(center, radius):
    cx, cy = center

    def inside(x, y):
        return (np.asarray(x) - cx) ** 2 + (np.asarray(y) - cy) ** 2 < radius ** 2

    return inside
