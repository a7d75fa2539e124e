"""One-shot matrix omni-directional integration on arbitrary cell meshes.

Every cell c gets one equation tying its pressure to its data-bearing
neighbours j through a trapezoidal line integral of the gradient along the
centroid-to-centroid vector:

    sum_j w_j (p_c - p_j) = -sum_j w_j * Delta_j . (g_j + g_c) / 2,
    w_j = A_j / A_tot

``A_j`` is the shared face length and ``A_tot`` the cell perimeter (all
faces, including ones facing voids or the domain edge). Faces without data
on the far side drop out of both sums.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg  # noqa: F401  (sp.linalg.norm)
from scipy.sparse.csgraph import connected_components

from .errors import DivergenceError, SymmetryError
from .fields import PointSet2, ScalarSamples, VectorSamples
from .meshkit import BOUNDARY, CellMesh
from .metrics import ReconstructionReport

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CgOptions:
    tol: float = 1e-10
    max_iter: int = None  # default 10 * n
    jacobi: bool = False
    divergence_window: int = 50

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """Compressed-row system ``matrix @ p = rhs``.

    ``row_scale`` is the per-row perimeter used in the weights; multiplying
    each row by it yields the symmetric face-length form. ``active`` flags
    rows that carry data (inactive rows are identity rows with zero rhs).
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    row_scale: np.ndarray
    active: np.ndarray

    @property
    def n(self):
        return self.matrix.shape[0]

    def rows(self):
        """Per-row lists of ``(column, coefficient)`` pairs."""
        A = self.matrix
        return [list(zip(A.indices[A.indptr[i]:A.indptr[i + 1]].tolist(),
                         A.data[A.indptr[i]:A.indptr[i + 1]].tolist())) for i in range(self.n)]


@dataclass
class CgResult:
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool


def cell_usable(mesh: CellMesh, source: VectorSamples):
    g = np.asarray(source.values, float)[:, :2]
    ok = np.all(np.isfinite(g), axis=1)
    if isinstance(source, VectorSamples):
        ok &= source.points.valid
    if len(ok) != mesh.n_cells:
        raise ValueError(f"source has {len(ok)} samples for {mesh.n_cells} cells")
    return g, ok


def assemble_osmodi(mesh: CellMesh, source: VectorSamples) -> SparseSystem:
    g, ok = cell_usable(mesh, source)
    n = mesh.n_cells
    owner = np.repeat(np.arange(n), np.diff(mesh.face_ptr))
    nbr = mesh.face_nbr
    a_tot = mesh.total_face_length()
    # a face carries data only if both ends do
    live = (nbr != BOUNDARY) & ok[owner]
    live[live] &= ok[nbr[live]]
    c, j = owner[live], nbr[live]
    w = mesh.face_len[live] / a_tot[c]
    d = mesh.face_delta[live]
    trap = 0.5 * np.einsum("ij,ij->i", g[j] + g[c], d)

    diag = np.bincount(c, weights=w, minlength=n)
    rhs = -np.bincount(c, weights=w * trap, minlength=n)
    has_nbr = diag > 0
    isolated = ok & ~has_nbr
    if isolated.any():
        log.warning("%d cell(s) with data but no data-bearing neighbour; using identity rows",
                    int(isolated.sum()))
    ident = ~has_nbr
    diag[ident] = 1.0
    rhs[ident] = 0.0
    rows = np.concatenate([np.arange(n), c])
    cols = np.concatenate([np.arange(n), j])
    vals = np.concatenate([diag, -w])
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    A.sum_duplicates()
    A.sort_indices()
    scale = np.where(ident, 1.0, a_tot)
    return SparseSystem(A, rhs, scale, has_nbr)


def asymmetry(A):
    A = sp.csr_matrix(A)
    num = sp.linalg.norm(A - A.T)
    den = sp.linalg.norm(A)
    return float(num / den) if den > 0 else 0.0


def symmetrize(system: SparseSystem, avg_tol=1e-6):
    """Return an equivalent symmetric system and a note on how it was obtained.

    Nearly symmetric matrices are averaged with their transpose. Otherwise
    rows are multiplied by their perimeter, which gives the exactly
    symmetric face-length form; the normal equations are the last resort.
    """
    asym = asymmetry(system.matrix)
    if asym <= 1e-10:
        return system, "symmetric"
    if asym < avg_tol:
        A = 0.5 * (system.matrix + system.matrix.T)
        return replace(system, matrix=sp.csr_matrix(A)), "averaged"
    S = sp.diags(system.row_scale)
    A = sp.csr_matrix(S @ system.matrix)
    b = system.row_scale * system.rhs
    # face weights are shared, so only round-off asymmetry is left
    A = sp.csr_matrix(0.5 * (A + A.T)) if asymmetry(A) < 1e-12 else A
    if asymmetry(A) <= 1e-10:
        return replace(system, matrix=A, rhs=b, row_scale=np.ones(system.n)), "row-scaled"
    At = system.matrix.T.tocsr()
    return (replace(system, matrix=sp.csr_matrix(At @ system.matrix), rhs=At @ system.rhs,
                    row_scale=np.ones(system.n)), "normal-equations")


def cg_solve(system: SparseSystem, opts: CgOptions = CgOptions()) -> CgResult:
    """Conjugate gradient from the zero vector.

    On a consistent singular system the iterates stay in the range of the
    matrix, so the result is the minimum-norm solution.
    """
    A = sp.csr_matrix(system.matrix)
    asym = asymmetry(A)
    if asym > 1e-10:
        raise SymmetryError(asym)
    b = np.asarray(system.rhs, float)
    n = len(b)
    max_iter = opts.max_iter or 10 * n
    x = np.zeros(n)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return CgResult(x, 0, 0.0, True)
    if opts.jacobi:
        d = A.diagonal()
        minv = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 1.0)
    else:
        minv = None
    r = b.copy()
    z = r * minv if minv is not None else r
    p = z.copy()
    rz = r @ z
    rel = 1.0
    growth = 0
    prev = bnorm
    for it in range(1, max_iter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            # direction in the null space: nothing left to reduce
            return CgResult(x, it - 1, rel, rel <= opts.tol)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rn = np.linalg.norm(r)
        rel = rn / bnorm
        if rel <= opts.tol:
            return CgResult(x, it, rel, True)
        growth = growth + 1 if rn > prev else 0
        prev = rn
        if growth >= opts.divergence_window:
            raise DivergenceError(f"residual grew for {growth} consecutive iterations", iteration=it)
        z = r * minv if minv is not None else r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return CgResult(x, max_iter, rel, False)


def reconstruct_osmodi(mesh: CellMesh, source: VectorSamples, opts: CgOptions = CgOptions()) -> ReconstructionReport:
    t0 = time.perf_counter()
    system = assemble_osmodi(mesh, source)
    sym, how = symmetrize(system)
    b = np.array(sym.rhs, float)
    # the symmetric form is consistent up to round-off; strip what is left in
    # the constant null vector of each connected block of active cells
    ncomp, labels = connected_components(sym.matrix, directed=False)
    act = sym.active
    for k in np.unique(labels[act]):
        m = act & (labels == k)
        b[m] -= b[m].mean()
    sym = replace(sym, rhs=b)
    res = cg_solve(sym, opts)
    p = res.x
    valid = system.active
    if valid.any():
        p = p - p[valid].mean()
        p[~valid] = 0.0
    pts = PointSet2(mesh.centroids, valid)
    return ReconstructionReport(
        method="osmodi",
        pressure=ScalarSamples(pts, p),
        wall_time=time.perf_counter() - t0,
        diagnostics={"iterations": res.iterations, "residual": float(res.residual),
                     "converged": res.converged, "symmetrization": how,
                     "blocks": int(len(np.unique(labels[act])))},
    )
