"""Polygonal cell complexes and their face geometry."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateInputError, DuplicatePointError, TopologyError
from ..fields import CartesianGrid2, PointSet2
from .delaunay import triangulate
from .predicates import orient2d

BOUNDARY = -1


@dataclass(frozen=True, eq=False)
class CellMesh:
    """All-quad or all-triangle cell complex.

    Per-cell faces are stored CSR-style: the faces of cell ``c`` are rows
    ``face_ptr[c]:face_ptr[c+1]`` of ``face_nbr`` (neighbor id or
    ``BOUNDARY``), ``face_len`` (shared face length) and ``face_delta``
    (centroid-to-centroid vector, zero on boundary faces).

    Boundary elements are ordered so that each closed loop is contiguous and
    runs counter-clockwise; ``loops`` holds ``(start, stop)`` ranges.
    """

    vertices: np.ndarray
    cells: np.ndarray
    kind: str
    centroids: np.ndarray
    areas: np.ndarray
    face_ptr: np.ndarray
    face_nbr: np.ndarray
    face_len: np.ndarray
    face_delta: np.ndarray
    bnd_vertices: np.ndarray
    bnd_mid: np.ndarray
    bnd_normal: np.ndarray
    bnd_len: np.ndarray
    bnd_cell: np.ndarray
    loops: tuple
    vertex_ids: np.ndarray = None  # source point index of each vertex, if any

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_boundary(self):
        return len(self.bnd_len)

    def faces(self, c):
        s, e = self.face_ptr[c], self.face_ptr[c + 1]
        return self.face_nbr[s:e], self.face_len[s:e], self.face_delta[s:e]

    def total_face_length(self):
        """Per-cell perimeter, i.e. the normalisation A_tot summed over all faces."""
        return np.add.reduceat(self.face_len, self.face_ptr[:-1])

    def to_json(self):
        return {
            "kind": self.kind,
            "vertices": self.vertices.tolist(),
            "cells": self.cells.tolist(),
            "boundary": [
                {"vertices": [int(a), int(b)], "midpoint": m.tolist(),
                 "normal": nrm.tolist(), "length": float(L), "cell": int(c)}
                for (a, b), m, nrm, L, c in zip(self.bnd_vertices, self.bnd_mid, self.bnd_normal,
                                                self.bnd_len, self.bnd_cell)
            ],
        }

    @classmethod
    def from_json(cls, d):
        return build_cell_mesh(np.array(d["vertices"], float), np.array(d["cells"], np.int64),
                               d.get("kind"))


def _polygon_area_centroid(P):
    x, y = P[..., 0], P[..., 1]
    xn, yn = np.roll(x, -1, axis=-1), np.roll(y, -1, axis=-1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum(-1)
    cx = ((x + xn) * cross).sum(-1) / (6 * area)
    cy = ((y + yn) * cross).sum(-1) / (6 * area)
    return area, np.column_stack([cx, cy])


def build_cell_mesh(vertices, cells, kind=None, centroids=None, vertex_ids=None) -> CellMesh:
    """Derive adjacency, face geometry and boundary loops from ccw cells."""
    V = np.asarray(vertices, float)
    C = np.asarray(cells, np.int64)
    nv = C.shape[1]
    kind = kind or {3: "tri", 4: "quad"}[nv]
    area, centroid = _polygon_area_centroid(V[C])
    if np.any(area <= 0):
        bad = int(np.flatnonzero(area <= 0)[0])
        raise TopologyError(f"cell {bad} is not counter-clockwise or has zero area")
    if centroids is not None:
        centroid = np.asarray(centroids, float)
    if kind == "tri":
        centroid = V[C].mean(axis=1)

    # directed edge (a, b) of cell c; the twin (b, a) belongs to the neighbour
    a = C.ravel()
    b = np.roll(C, -1, axis=1).ravel()
    owner = np.repeat(np.arange(len(C)), nv)
    twin = {}
    for k, (u, w) in enumerate(zip(a.tolist(), b.tolist())):
        if (u, w) in twin:
            raise TopologyError(f"edge ({u}, {w}) is used twice in the same direction")
        twin[(u, w)] = k
    nbr = np.full(len(a), BOUNDARY, np.int64)
    for k, (u, w) in enumerate(zip(a.tolist(), b.tolist())):
        j = twin.get((w, u))
        if j is not None:
            nbr[k] = owner[j]
    edge_vec = V[b] - V[a]
    flen = np.hypot(edge_vec[:, 0], edge_vec[:, 1])
    delta = np.zeros((len(a), 2))
    inner = nbr != BOUNDARY
    delta[inner] = centroid[nbr[inner]] - centroid[owner[inner]]
    if np.any(flen <= 0):
        raise TopologyError("zero-length face")

    # boundary loops, following directed boundary edges head to tail
    bk = np.flatnonzero(~inner)
    start_of = {}
    for k in bk.tolist():
        if a[k] in start_of:
            raise TopologyError(f"boundary vertex {a[k]} is pinched (non-manifold)")
        start_of[int(a[k])] = k
    order, loops, seen = [], [], set()
    for k in bk.tolist():
        if k in seen:
            continue
        s = len(order)
        cur = k
        while cur not in seen:
            seen.add(cur)
            order.append(cur)
            nxt = start_of.get(int(b[cur]))
            if nxt is None:
                raise TopologyError("boundary is not a closed loop")
            cur = nxt
        if cur != k:
            raise TopologyError("boundary is not a closed loop")
        loops.append((s, len(order)))
    order = np.array(order, np.int64)
    ev = edge_vec[order]
    L = flen[order]
    normal = np.column_stack([ev[:, 1], -ev[:, 0]]) / L[:, None] if len(order) else np.zeros((0, 2))

    return CellMesh(
        vertices=_ro(V), cells=_ro(C), kind=kind, centroids=_ro(centroid), areas=_ro(area),
        face_ptr=_ro(np.arange(0, len(a) + 1, nv)), face_nbr=_ro(nbr), face_len=_ro(flen),
        face_delta=_ro(delta),
        bnd_vertices=_ro(np.column_stack([a[order], b[order]]) if len(order) else np.zeros((0, 2), np.int64)),
        bnd_mid=_ro(0.5 * (V[a[order]] + V[b[order]])), bnd_normal=_ro(normal), bnd_len=_ro(L),
        bnd_cell=_ro(owner[order]), loops=tuple(loops),
        vertex_ids=None if vertex_ids is None else _ro(vertex_ids),
    )


def _ro(x):
    x = np.asarray(x)
    x.setflags(write=False)
    return x


def cartesian_cell_mesh(grid: CartesianGrid2) -> CellMesh:
    """One square cell of side h centred on every grid node (cell id = node id)."""
    nx, ny, h = grid.nx, grid.ny, grid.h
    x0, y0 = grid.origin
    cx = x0 + h * (np.arange(nx + 1) - 0.5)
    cy = y0 + h * (np.arange(ny + 1) - 0.5)
    X, Y = np.meshgrid(cx, cy)
    V = np.column_stack([X.ravel(), Y.ravel()])
    j, i = np.divmod(np.arange(nx * ny), nx)
    corner = lambda ii, jj: jj * (nx + 1) + ii  # noqa: E731
    C = np.column_stack([corner(i, j), corner(i + 1, j), corner(i + 1, j + 1), corner(i, j + 1)])
    m = build_cell_mesh(V, C, "quad", centroids=grid.points().coords)
    # every face is exactly h on a uniform grid; drop the vertex round-off
    delta = np.where(m.face_nbr[:, None] == BOUNDARY, 0.0, np.sign(np.rint(m.face_delta / h)) * h)
    return dataclasses.replace(m, face_len=np.full(len(m.face_len), h), face_delta=delta,
                               bnd_len=np.full(len(m.bnd_len), h), areas=np.full(m.n_cells, h * h))


def find_duplicates(coords):
    c = np.asarray(coords, float)
    order = np.lexsort((c[:, 1], c[:, 0]))
    s = c[order]
    same = np.all(s[1:] == s[:-1], axis=1)
    return [(int(order[k]), int(order[k + 1])) for k in np.flatnonzero(same)]


def delaunay_triangulate(points: PointSet2) -> CellMesh:
    """Delaunay triangulation of the convex hull of the valid points.

    Cocircular ties are resolved towards the diagonal through the lowest
    vertex index. Mesh vertices are the valid points in their original order;
    ``vertex_ids`` maps them back to indices of ``points``.
    """
    ids = np.flatnonzero(points.valid)
    coords = points.coords[ids]
    if len(coords) < 3:
        raise DegenerateInputError("need at least 3 points to triangulate")
    dup = find_duplicates(coords)
    if dup:
        raise DuplicatePointError([(ids[a], ids[b]) for a, b in dup])
    p0 = coords[0]
    far = np.argmax(np.hypot(*(coords - p0).T))
    p0, pf = tuple(p0), tuple(coords[far])
    if not any(orient2d(p0, pf, tuple(q)) for q in coords.tolist()):
        raise DegenerateInputError("all points are collinear")
    tris = triangulate(coords)
    return build_cell_mesh(coords, tris, "tri", vertex_ids=ids)


def convex_hull_area(coords):
    from scipy.spatial import ConvexHull

    return float(ConvexHull(np.asarray(coords, float)).volume)


def vertex_to_cell(mesh: CellMesh, values):
    """Average per-vertex samples onto cells; a cell with any NaN vertex gets NaN.

    Cartesian meshes are node-centred, so values pass through unchanged.
    """
    v = np.asarray(values, float)
    if mesh.kind == "quad" and len(v) == mesh.n_cells:
        return v.copy()
    if len(v) != len(mesh.vertices):
        raise ValueError(f"{len(v)} vertex samples for {len(mesh.vertices)} vertices")
    return v[mesh.cells].mean(axis=1)
