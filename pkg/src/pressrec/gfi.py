"""Green's-function integral reconstruction with the constant midpoint rule.

With ``r = x_target - x_source`` the 2D kernels are ``r / |r|^2``. Boundary
pressures solve

    p_k + (1/pi) sum_k' p_k' (r_kk' . dS_k') / r_kk'^2 = (1/pi) sum_j (g_j . r_kj) / r_kj^2 dV_j

and interior values follow from the same sums with ``1/(2 pi)`` prefactors.
Each boundary element and cell is collapsed to its midpoint or centroid,
which is exactly what makes slivers next to the boundary inaccurate.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import CoincidentPointError, RankDeficiencyError, TopologyError
from .fields import PointSet2, ScalarSamples, VectorSamples
from .meshkit import CellMesh
from .metrics import ReconstructionReport
from .osmodi import cell_usable

COINCIDENT = 1e-14
CHUNK = 512


@dataclass(frozen=True, eq=False)
class BoundarySystem:
    """``(identity + kernel) p = rhs`` over the boundary elements."""

    kernel: np.ndarray
    rhs: np.ndarray

    @property
    def n_b(self):
        return len(self.rhs)

    @property
    def matrix(self):
        return np.eye(self.n_b) + self.kernel


@dataclass
class BoundarySolution:
    pressure: np.ndarray
    residual: float
    rank: int


def _volume_sum(targets, sources, g, dV, skip_self=None):
    """sum_j (g_j . (t - s_j)) / |t - s_j|^2 dV_j for every target t."""
    out = np.empty(len(targets))
    for s in range(0, len(targets), CHUNK):
        t = targets[s:s + CHUNK]
        rx = t[:, None, 0] - sources[None, :, 0]
        ry = t[:, None, 1] - sources[None, :, 1]
        r2 = rx * rx + ry * ry
        if skip_self is not None:
            idx = skip_self[s:s + CHUNK]
            rows = np.flatnonzero(idx >= 0)
            r2[rows, idx[rows]] = np.inf
        if np.any(r2 < COINCIDENT ** 2):
            raise CoincidentPointError("a target point coincides with a source point")
        out[s:s + CHUNK] = ((rx * g[None, :, 0] + ry * g[None, :, 1]) / r2) @ dV
    return out


def _double_layer(targets, mid, dS, skip_self=False):
    """Matrix of (r . dS_k) / r^2 from each boundary element k to each target."""
    rx = targets[:, None, 0] - mid[None, :, 0]
    ry = targets[:, None, 1] - mid[None, :, 1]
    r2 = rx * rx + ry * ry
    if skip_self:
        np.fill_diagonal(r2, np.inf)
    if np.any(r2 < COINCIDENT ** 2):
        raise CoincidentPointError("a target point coincides with a boundary midpoint")
    return (rx * dS[None, :, 0] + ry * dS[None, :, 1]) / r2


def _check_closed(mesh: CellMesh):
    if mesh.n_boundary == 0 or not mesh.loops:
        raise TopologyError("mesh has no closed boundary loop")
    covered = sum(e - s for s, e in mesh.loops)
    if covered != mesh.n_boundary:
        raise TopologyError("boundary elements do not form closed loops")


def assemble_gfi_boundary(mesh: CellMesh, source: VectorSamples) -> BoundarySystem:
    _check_closed(mesh)
    g, ok = cell_usable(mesh, source)
    mid = mesh.bnd_mid
    dS = mesh.bnd_normal * mesh.bnd_len[:, None]
    kernel = _double_layer(mid, mid, dS, skip_self=True) / np.pi
    rhs = _volume_sum(mid, mesh.centroids[ok], g[ok], mesh.areas[ok]) / np.pi
    return BoundarySystem(kernel, rhs)


def solve_gfi(system: BoundarySystem, gauge=True, rcond=1e-12) -> BoundarySolution:
    """Least-squares boundary pressures.

    With ``gauge`` a zero-mean row is appended, fixing the constant that the
    pure-Neumann operator leaves (nearly) undetermined.
    """
    M = system.matrix
    n = system.n_b
    sv = np.linalg.svd(M, compute_uv=False)
    rank = int(np.sum(sv > rcond * sv[0])) if n else 0
    if rank < n - 2:
        raise RankDeficiencyError(rank, n)
    if gauge:
        A = np.vstack([M, np.ones((1, n))])
        b = np.append(system.rhs, 0.0)
    else:
        A, b = M, system.rhs
    p, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = float(np.linalg.norm(M @ p - system.rhs))
    return BoundarySolution(p, resid, rank)


def evaluate_gfi_interior(mesh: CellMesh, source: VectorSamples, boundary_pressure, targets=None):
    """Pressure at every usable cell centroid (or at explicit ``targets``)."""
    g, ok = cell_usable(mesh, source)
    pb = np.asarray(getattr(boundary_pressure, "pressure", boundary_pressure), float)
    src = mesh.centroids[ok]
    if targets is None:
        tgt = mesh.centroids
        # a cell's own centroid is skipped: its midpoint-rule self term vanishes
        self_idx = np.full(mesh.n_cells, -1)
        self_idx[ok] = np.arange(int(ok.sum()))
        valid = ok
    else:
        tgt = np.asarray(targets, float)
        self_idx = None
        valid = np.ones(len(tgt), bool)
    dS = mesh.bnd_normal * mesh.bnd_len[:, None]
    vol = _volume_sum(tgt, src, g[ok], mesh.areas[ok], skip_self=self_idx)
    dl = np.empty(len(tgt))
    for s in range(0, len(tgt), CHUNK):
        dl[s:s + CHUNK] = _double_layer(tgt[s:s + CHUNK], mesh.bnd_mid, dS) @ pb
    p = (vol - dl) / (2 * np.pi)
    p[~valid] = np.nan
    return ScalarSamples(PointSet2(tgt, valid), p)


def reconstruct_gfi(mesh: CellMesh, source: VectorSamples) -> ReconstructionReport:
    t0 = time.perf_counter()
    system = assemble_gfi_boundary(mesh, source)
    sol = solve_gfi(system)
    interior = evaluate_gfi_interior(mesh, source, sol.pressure)
    p = np.array(interior.values)
    ok = interior.points.valid
    if ok.any():
        p[ok] -= p[ok].mean()
    return ReconstructionReport(
        method="gfi",
        pressure=ScalarSamples(interior.points, p),
        wall_time=time.perf_counter() - t0,
        diagnostics={"boundary_elements": system.n_b, "boundary_residual": sol.residual,
                     "rank": sol.rank, "boundary_pressure": sol.pressure.tolist()},
    )
