"""
Mesh generation without an external mesher.

  - build_rectangle_mesh: structured grid, each cell split into two triangles
    with alternating diagonals
  - build_disk_mesh: concentric rings (6k vertices on ring k) zipped together
  - distort_mesh: deterministic pseudo-random interior perturbation
  - refine_uniform: split every triangle into four through edge midpoints

Curved boundaries are approximated by straight-edged triangles; refinement
does not project new boundary midpoints onto the circle.

Pseudo-randomness uses numpy's default_rng (PCG64) seeded explicitly, so a
given (mesh, amplitude, seed) always produces the same coordinates.
"""

import math

import numpy as np
import structlog

from src.errors import ConfigError
from src.mesh.mesh import Mesh, validate

logger = structlog.get_logger("mesh.build")

MAX_DISTORTION = 0.3
MAX_DISTORTION_RETRIES = 60    # amplitude halves per retry; 2^-60 is below round-off


def build_rectangle_mesh(x_range: tuple[float, float], y_range: tuple[float, float],
                         target_edge_length: float) -> Mesh:
    """
    Conforming triangulation of [x0, x1] x [y0, y1].

    The grid spacing is the largest value <= target in each direction, so axis
    edges are <= target and diagonals are <= sqrt(2) * target.
    """
    x0, x1 = map(float, x_range)
    y0, y1 = map(float, y_range)
    if not (x1 > x0) or not (y1 > y0):
        raise ConfigError(f"degenerate rectangle ({x0}, {x1}) x ({y0}, {y1})")
    if not (target_edge_length > 0):
        raise ConfigError(f"target edge length must be > 0, got {target_edge_length}")

    nx = max(1, math.ceil((x1 - x0) / target_edge_length - 1e-9))
    ny = max(1, math.ceil((y1 - y0) / target_edge_length - 1e-9))

    # linspace pins both end points exactly on the rectangle edges
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    i = i.ravel()
    j = j.ravel()
    v00 = j * (nx + 1) + i
    v10 = v00 + 1
    v01 = v00 + (nx + 1)
    v11 = v01 + 1

    # Alternate the diagonal in a checkerboard so the mesh has no preferred direction
    flip = (i + j) % 2 == 1
    tri_a = np.where(flip[:, None],
                     np.column_stack([v00, v10, v01]),
                     np.column_stack([v00, v10, v11]))
    tri_b = np.where(flip[:, None],
                     np.column_stack([v10, v11, v01]),
                     np.column_stack([v00, v11, v01]))
    triangles = np.vstack([tri_a, tri_b])

    mesh = validate(Mesh(vertices=vertices, triangles=triangles))
    logger.info("rectangle_mesh_built", nx=nx, ny=ny,
                n_vertices=mesh.n_vertices, n_triangles=mesh.n_triangles)
    return mesh


def _ring(n_points: int, radius: float, start: int) -> tuple[np.ndarray, np.ndarray]:
    angles = 2.0 * np.pi * np.arange(n_points) / n_points
    coords = np.column_stack([radius * np.cos(angles), radius * np.sin(angles)])
    return coords, start + np.arange(n_points)


def _zip_rings(inner: np.ndarray, outer: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate the band between two rings by merging their angular orders."""
    n_in, n_out = len(inner), len(outer)
    triangles = []
    i = j = 0
    while i < n_in or j < n_out:
        next_in = (i + 1) / n_in
        next_out = (j + 1) / n_out
        if j == n_out or (i < n_in and next_in < next_out):
            triangles.append((inner[i % n_in], inner[(i + 1) % n_in], outer[j % n_out]))
            i += 1
        else:
            triangles.append((inner[i % n_in], outer[(j + 1) % n_out], outer[j % n_out]))
            j += 1
    return triangles


def _orient_ccw(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    cw = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) < 0
    fixed = triangles.copy()
    fixed[cw, 1], fixed[cw, 2] = triangles[cw, 2], triangles[cw, 1]
    return fixed


def build_disk_mesh(radius: float, target_edge_length: float,
                    center: tuple[float, float] = (0.0, 0.0)) -> Mesh:
    """
    Concentric-ring triangulation of the disk |x - center| <= radius.

    Ring k (k = 1..n) sits at radius k*radius/n with 6k equally spaced vertices,
    so both radial and arc spacing are about radius/n <= target. The outer
    ring lies exactly on the circle; the domain is its inscribed polygon.
    """
    if not (radius > 0):
        raise ConfigError(f"disk radius must be > 0, got {radius}")
    if not (target_edge_length > 0):
        raise ConfigError(f"target edge length must be > 0, got {target_edge_length}")
    if target_edge_length >= radius:
        raise ConfigError(
            f"target edge length {target_edge_length} must be smaller than the radius {radius}")

    n_rings = max(2, math.ceil(radius / target_edge_length - 1e-9))

    coords = [np.zeros((1, 2))]
    rings = [np.array([0])]
    start = 1
    for k in range(1, n_rings + 1):
        # Exact radius on the outer ring so boundary vertices satisfy |x| = radius
        r = radius if k == n_rings else radius * k / n_rings
        ring_coords, ids = _ring(6 * k, r, start)
        coords.append(ring_coords)
        rings.append(ids)
        start += 6 * k
    vertices = np.vstack(coords)

    triangles = []
    first = rings[1]
    for j in range(len(first)):
        triangles.append((0, first[j], first[(j + 1) % len(first)]))
    for k in range(2, n_rings + 1):
        triangles.extend(_zip_rings(rings[k - 1], rings[k]))

    triangles = _orient_ccw(vertices, np.array(triangles, dtype=np.int64))
    vertices = vertices + np.asarray(center, dtype=float)

    mesh = validate(Mesh(vertices=vertices, triangles=triangles))
    logger.info("disk_mesh_built", radius=radius, n_rings=n_rings,
                n_vertices=mesh.n_vertices, n_triangles=mesh.n_triangles)
    return mesh


def distort_mesh(mesh: Mesh, amplitude: float, seed: int) -> Mesh:
    """
    Displace interior vertices by at most amplitude * (shortest incident edge).

    Boundary vertices stay put. A vertex whose move inverts an incident
    triangle has its displacement halved and the check repeats, so the
    result is always a valid mesh.
    """
    if not (0 <= amplitude < MAX_DISTORTION):
        raise ConfigError(f"distortion amplitude must be in [0, {MAX_DISTORTION}), got {amplitude}")
    if amplitude == 0:
        return Mesh(vertices=mesh.vertices.copy(), triangles=mesh.triangles)

    rng = np.random.default_rng(seed)
    n = mesh.n_vertices

    shortest = np.full(n, np.inf)
    np.minimum.at(shortest, mesh.edges[:, 0], mesh.edge_lengths)
    np.minimum.at(shortest, mesh.edges[:, 1], mesh.edge_lengths)

    # Uniform direction, uniform radius in [0, 1)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    rho = rng.uniform(0.0, 1.0, size=n)
    offsets = (amplitude * shortest * rho)[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])
    offsets[mesh.boundary_vertices] = 0.0

    scale = np.ones(n)
    retries = 0
    for retries in range(MAX_DISTORTION_RETRIES + 1):
        if retries == MAX_DISTORTION_RETRIES:
            scale = np.zeros(n)
        candidate = mesh.with_vertices(mesh.vertices + scale[:, None] * offsets)
        bad = candidate.signed_areas <= 0
        if not bad.any():
            break
        scale[np.unique(mesh.triangles[bad].ravel())] *= 0.5

    if retries:
        logger.warning("distortion_retried", retries=retries,
                       vertices_damped=int((scale < 1).sum()))
    logger.info("mesh_distorted", amplitude=amplitude, seed=seed,
                max_offset=float(np.abs(scale[:, None] * offsets).max()))
    return validate(candidate)


def refine_uniform(mesh: Mesh) -> Mesh:
    """
    Split each triangle into four through its edge midpoints.

    New vertex ids: old vertices keep theirs, the midpoint of edge e gets
    n_vertices + e (the same numbering as the P2 dofs of the parent mesh).
    """
    n_v = mesh.n_vertices
    vertices = np.vstack([mesh.vertices, mesh.edge_midpoints])

    v = mesh.triangles
    m = n_v + mesh.triangle_edges    # m[:, i] is the midpoint opposite vertex i
    triangles = np.vstack([
        np.column_stack([v[:, 0], m[:, 2], m[:, 1]]),
        np.column_stack([v[:, 1], m[:, 0], m[:, 2]]),
        np.column_stack([v[:, 2], m[:, 1], m[:, 0]]),
        np.column_stack([m[:, 0], m[:, 1], m[:, 2]]),
    ])
    refined = Mesh(vertices=vertices, triangles=triangles)
    logger.debug("mesh_refined", n_triangles=refined.n_triangles)
    return refined
