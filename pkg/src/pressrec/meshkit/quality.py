"""Triangle shape diagnostics."""
from dataclasses import dataclass

import numpy as np

from ..errors import UnsupportedMeshError


@dataclass(frozen=True)
class TriangleQuality:
    circumradius: float
    inradius: float
    aspect_ratio: float


def triangle_quality(tri) -> TriangleQuality:
    p = np.asarray(tri, float)
    R, r, ar = _radii(p[None])
    return TriangleQuality(float(R[0]), float(r[0]), float(ar[0]))


def aspect_ratio(tri) -> float:
    """Circumradius over twice the inradius; 1 for equilateral, inf if degenerate."""
    return triangle_quality(tri).aspect_ratio


def _radii(P):
    a = np.linalg.norm(P[:, 1] - P[:, 2], axis=1)
    b = np.linalg.norm(P[:, 2] - P[:, 0], axis=1)
    c = np.linalg.norm(P[:, 0] - P[:, 1], axis=1)
    d1, d2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
    area = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    s = 0.5 * (a + b + c)
    scale = np.maximum(np.maximum(a, b), c)
    degenerate = area <= 1e-14 * np.maximum(scale * scale, np.finfo(float).tiny)
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.where(degenerate, np.inf, a * b * c / (4 * area))
        r = np.where(degenerate, 0.0, area / s)
        ratio = np.where(degenerate, np.inf, a * b * c * s / (8 * area * area))
    return R, r, ratio


def mesh_aspect_ratios(mesh):
    if mesh.kind != "tri":
        raise UnsupportedMeshError(f"aspect ratios need a triangle mesh, got {mesh.kind}")
    return _radii(mesh.vertices[mesh.cells])[2]


def quality_histogram(mesh, saturation=20.0, bins=19):
    """Histogram of triangle aspect ratios on [1, saturation].

    Ratios beyond ``saturation`` (including degenerate infinities) are
    clamped into the last bin. Returns ``(edges, counts)``.
    """
    ratios = mesh_aspect_ratios(mesh)
    edges = np.linspace(1.0, saturation, bins + 1)
    clamped = np.clip(ratios, 1.0, saturation)
    counts, _ = np.histogram(clamped, bins=edges)
    return edges, counts
