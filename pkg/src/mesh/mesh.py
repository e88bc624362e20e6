"""
Unstructured triangular mesh.

A Mesh holds vertex coordinates and counter-clockwise triangles. Everything
else (edge table, boundary edges, areas) is derived lazily and cached; the
arrays are never mutated after construction, so meshes can be shared
read-only between workers.

Local conventions used throughout the package:
  - triangle vertices 0, 1, 2 in CCW order
  - local edge i is the edge opposite vertex i: (1,2), (2,0), (0,1)
  - boundary edges are stored as (a, b, triangle) oriented as in the
    triangle's CCW order, so the outward normal is (dy, -dx) for b - a = (dx, dy)
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import structlog

from src.errors import MeshValidationError

logger = structlog.get_logger("mesh.mesh")

# Local edge i connects these two local vertices (opposite vertex i)
LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])


@dataclass(frozen=True, eq=False)
class Mesh:
    """2D triangulation: vertices (n, 2) float, triangles (m, 3) int, CCW."""
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        vertices = np.ascontiguousarray(self.vertices, dtype=float)
        triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshValidationError(f"vertices must have shape (n, 2), got {vertices.shape}")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshValidationError(f"triangles must have shape (m, 3), got {triangles.shape}")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise MeshValidationError("triangle references a vertex index out of range")
        vertices.setflags(write=False)
        triangles.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    # --- Geometry ---

    @cached_property
    def corners(self) -> np.ndarray:
        """Vertex coordinates per triangle, shape (m, 3, 2)."""
        return self.vertices[self.triangles]

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.corners
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    # --- Topology ---

    @cached_property
    def _edge_data(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        local = self.triangles[:, LOCAL_EDGES]          # (m, 3, 2)
        pairs = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse, counts = np.unique(pairs, axis=0, return_inverse=True,
                                           return_counts=True)
        return edges, inverse.reshape(-1, 3), counts

    @property
    def edges(self) -> np.ndarray:
        """Unique undirected edges (E, 2), lower vertex index first."""
        return self._edge_data[0]

    @property
    def triangle_edges(self) -> np.ndarray:
        """Edge id of local edge i (opposite vertex i), shape (m, 3)."""
        return self._edge_data[1]

    @property
    def edge_triangle_count(self) -> np.ndarray:
        """Number of triangles sharing each edge."""
        return self._edge_data[2]

    @cached_property
    def edge_midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @cached_property
    def boundary_edge_ids(self) -> np.ndarray:
        return np.flatnonzero(self.edge_triangle_count == 1)

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """Boundary edges (B, 3) as (a, b, triangle) with outward orientation."""
        is_boundary = self.edge_triangle_count[self.triangle_edges] == 1   # (m, 3)
        tri, local = np.nonzero(is_boundary)
        a = self.triangles[tri, LOCAL_EDGES[local, 0]]
        b = self.triangles[tri, LOCAL_EDGES[local, 1]]
        return np.stack([a, b, tri], axis=1)

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.edges[self.boundary_edge_ids].ravel())

    @cached_property
    def boundary_normals(self) -> np.ndarray:
        """Outward unit normals of boundary_edges, shape (B, 2)."""
        d = self.vertices[self.boundary_edges[:, 1]] - self.vertices[self.boundary_edges[:, 0]]
        n = np.stack([d[:, 1], -d[:, 0]], axis=1)
        return n / np.hypot(n[:, 0], n[:, 1])[:, None]

    def with_vertices(self, vertices: np.ndarray) -> "Mesh":
        """Same connectivity, new coordinates."""
        return Mesh(vertices=np.array(vertices, dtype=float), triangles=self.triangles)


def validate(mesh: Mesh, declared_boundary: np.ndarray | None = None,
             area_tol: float = 0.0) -> Mesh:
    """
    Check the mesh invariants; raise MeshValidationError on the first violation.

    Checks:
      - every triangle has positive signed area
      - every vertex is referenced by a triangle
      - each edge is shared by 1 (boundary) or 2 (interior) triangles
      - boundary edges form closed loops (each boundary vertex has equal in/out degree)
      - if the source declared boundary edges (e.g. gmsh line elements), they
        match the topological boundary exactly

    Returns the mesh for chaining.
    """
    if mesh.n_triangles == 0:
        raise MeshValidationError("mesh has no triangles")

    bad = np.flatnonzero(mesh.signed_areas <= area_tol)
    if bad.size:
        raise MeshValidationError(
            f"{bad.size} triangle(s) not positively oriented, first id {int(bad[0])} "
            f"(signed area {mesh.signed_areas[bad[0]]:.3e})")

    referenced = np.zeros(mesh.n_vertices, dtype=bool)
    referenced[mesh.triangles.ravel()] = True
    if not referenced.all():
        raise MeshValidationError(
            f"{int((~referenced).sum())} vertex/vertices not referenced by any triangle")

    counts = mesh.edge_triangle_count
    overshared = np.flatnonzero(counts > 2)
    if overshared.size:
        e = mesh.edges[overshared[0]]
        raise MeshValidationError(
            f"non-conforming connectivity: edge ({e[0]}, {e[1]}) shared by "
            f"{int(counts[overshared[0]])} triangles")

    # Two triangles sharing an edge must traverse it in opposite directions
    directed = mesh.triangles[:, LOCAL_EDGES].reshape(-1, 2)
    _, dir_counts = np.unique(directed, axis=0, return_counts=True)
    if (dir_counts > 1).any():
        raise MeshValidationError("inconsistent orientation: a directed edge appears twice")

    boundary = mesh.boundary_edges
    out_deg = np.bincount(boundary[:, 0], minlength=mesh.n_vertices)
    in_deg = np.bincount(boundary[:, 1], minlength=mesh.n_vertices)
    if not np.array_equal(out_deg, in_deg):
        raise MeshValidationError("boundary edges do not form closed loops")

    census = int((counts == 2).sum()) + len(boundary)
    if census != mesh.n_edges:
        raise MeshValidationError(
            f"edge census mismatch: {census} interior+boundary vs {mesh.n_edges} edges")

    if declared_boundary is not None and len(declared_boundary):
        declared = {tuple(sorted(map(int, e))) for e in declared_boundary}
        topological = {tuple(sorted(map(int, e))) for e in boundary[:, :2]}
        untagged = topological - declared
        phantom = declared - topological
        if phantom:
            e = sorted(phantom)[0]
            raise MeshValidationError(
                f"declared boundary edge ({e[0]}, {e[1]}) is not a boundary of the "
                f"triangulation ({len(phantom)} such edge(s))")
        if untagged:
            e = sorted(untagged)[0]
            raise MeshValidationError(
                f"edge ({e[0]}, {e[1]}) bounds a single triangle but is not declared "
                f"as boundary: the mesh has a hole or an untagged boundary curve "
                f"({len(untagged)} such edge(s)); every boundary edge must be a "
                f"declared line element")

    logger.debug("mesh_validated", n_vertices=mesh.n_vertices,
                 n_triangles=mesh.n_triangles, n_boundary_edges=len(boundary))
    return mesh


def mesh_summary(mesh: Mesh) -> dict:
    """Counts and quality figures for logging and CLI banners."""
    return {
        "n_vertices": mesh.n_vertices,
        "n_triangles": mesh.n_triangles,
        "n_edges": mesh.n_edges,
        "n_boundary_edges": len(mesh.boundary_edges),
        "total_area": mesh.total_area,
        "min_edge_length": float(mesh.edge_lengths.min()),
        "max_edge_length": float(mesh.edge_lengths.max()),
        "min_triangle_area": float(mesh.areas.min()),
    }
