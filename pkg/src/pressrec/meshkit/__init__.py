from .mesh import (BOUNDARY, CellMesh, build_cell_mesh, cartesian_cell_mesh, convex_hull_area,
                   delaunay_triangulate, find_duplicates, vertex_to_cell)
from .quality import TriangleQuality, aspect_ratio, mesh_aspect_ratios, quality_histogram, triangle_quality

__all__ = [
    "BOUNDARY", "CellMesh", "build_cell_mesh", "cartesian_cell_mesh", "convex_hull_area",
    "delaunay_triangulate", "find_duplicates", "vertex_to_cell", "TriangleQuality", "aspect_ratio", "mesh_aspect_ratios",
    "quality_histogram", "triangle_quality",
]
