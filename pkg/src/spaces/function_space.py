"""
The P2 / P1DG space pair on a triangular mesh.

P2ScalarSpace (continuous quadratics, thickness and streamfunction):
  global dofs = vertices, then edge midpoints (dof n_vertices + edge id);
  per-triangle map [v0, v1, v2, m0, m1, m2] with m_i on the edge opposite v_i.

P1DGVectorSpace (discontinuous linear vectors, velocity):
  global dof of (element e, component c, node a) = 6*e + 3*c + a, so each
  element's velocity is the contiguous block [x0, x1, x2, y0, y1, y2].
  Nodes sit at the element vertices but are never shared.

Fields are coefficient vectors bound to a space. Interpolation is nodal;
norms use the degree-6 rule on the affine elements.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from src.errors import ConfigError
from src.mesh.mesh import Mesh
from src.spaces.basis import P1_NODES, p1_values, p2_gradients, p2_values
from src.spaces.quadrature import composite_quadrature

NORM_QUADRATURE_DEGREE = 6
ERROR_SUBDIVISIONS = 1          # composite levels for errors against analytic functions

ScalarFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]
VectorFunction = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


# --- Element geometry ---

@dataclass(frozen=True, eq=False)
class AffineMaps:
    """x = p0 + J (xi, eta) per element; grad phi = J^{-T} grad_ref phi."""
    jacobians: np.ndarray       # (m, 2, 2), columns p1 - p0 and p2 - p0
    determinants: np.ndarray    # (m,), = 2 * area for CCW triangles
    inverse_transposes: np.ndarray


def affine_maps(mesh: Mesh) -> AffineMaps:
    p = mesh.corners
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    inv_t = np.empty_like(J)
    inv_t[:, 0, 0] = J[:, 1, 1]
    inv_t[:, 0, 1] = -J[:, 1, 0]
    inv_t[:, 1, 0] = -J[:, 0, 1]
    inv_t[:, 1, 1] = J[:, 0, 0]
    inv_t /= det[:, None, None]
    return AffineMaps(jacobians=J, determinants=det, inverse_transposes=inv_t)


def physical_points(mesh: Mesh, bary: np.ndarray) -> np.ndarray:
    """Map barycentric points (q, 3) into every element: shape (m, q, 2)."""
    return np.einsum("qa,mad->mqd", np.atleast_2d(bary), mesh.corners)


# --- Spaces ---

class P2ScalarSpace:
    """Continuous piecewise-quadratic scalars."""

    kind = "p2"

    def __init__(self, mesh: Mesh):
        self.mesh = mesh

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_vertices + self.mesh.n_edges

    @cached_property
    def cell_dofs(self) -> np.ndarray:
        """(m, 6) global dofs per element in local P2 order."""
        dofs = np.hstack([self.mesh.triangles, self.mesh.n_vertices + self.mesh.triangle_edges])
        dofs.setflags(write=False)
        return dofs

    @cached_property
    def node_coords(self) -> np.ndarray:
        return np.vstack([self.mesh.vertices, self.mesh.edge_midpoints])

    @cached_property
    def boundary_dofs(self) -> np.ndarray:
        """Boundary vertices and the midpoints of boundary edges."""
        return np.concatenate([self.mesh.boundary_vertices,
                               self.mesh.n_vertices + self.mesh.boundary_edge_ids])

    def __repr__(self) -> str:
        return f"P2ScalarSpace(n_dofs={self.n_dofs})"


class P1DGVectorSpace:
    """Discontinuous piecewise-linear 2-vectors."""

    kind = "p1dg"

    def __init__(self, mesh: Mesh):
        self.mesh = mesh

    @property
    def n_dofs(self) -> int:
        return 6 * self.mesh.n_triangles

    @cached_property
    def cell_dofs(self) -> np.ndarray:
        return np.arange(self.n_dofs).reshape(-1, 6)

    @property
    def node_coords(self) -> np.ndarray:
        """(m, 3, 2) coordinates of each element's three nodes."""
        return self.mesh.corners

    def components(self, coefficients: np.ndarray) -> np.ndarray:
        """View coefficients as (m, 2, 3): [element, component, node]."""
        return np.asarray(coefficients).reshape(-1, 2, 3)

    def __repr__(self) -> str:
        return f"P1DGVectorSpace(n_dofs={self.n_dofs})"


Space = P2ScalarSpace | P1DGVectorSpace


@dataclass(frozen=True, eq=False)
class Field:
    """Coefficient vector on a space."""
    space: Space
    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coefficients, dtype=float).ravel()
        if len(coeffs) != self.space.n_dofs:
            raise ConfigError(
                f"field has {len(coeffs)} coefficients, space {self.space!r} needs {self.space.n_dofs}")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def is_vector(self) -> bool:
        return isinstance(self.space, P1DGVectorSpace)

    def with_coefficients(self, coefficients: np.ndarray) -> "Field":
        return Field(self.space, coefficients)

    def __add__(self, other: "Field") -> "Field":
        return Field(self.space, self.coefficients + other.coefficients)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.space, self.coefficients - other.coefficients)

    def __mul__(self, scalar: float) -> "Field":
        return Field(self.space, scalar * self.coefficients)

    __rmul__ = __mul__


def zero_field(space: Space) -> Field:
    return Field(space, np.zeros(space.n_dofs))


# --- Interpolation ---

def interpolate_scalar(space: P2ScalarSpace, f: ScalarFunction) -> Field:
    """Nodal P2 interpolant: coefficients are f at vertices and edge midpoints."""
    xy = space.node_coords
    values = np.broadcast_to(np.asarray(f(xy[:, 0], xy[:, 1]), dtype=float), (space.n_dofs,))
    return Field(space, values)


def interpolate_vector(space: P1DGVectorSpace, f: VectorFunction) -> Field:
    """Nodal P1DG interpolant, evaluated separately at each element's vertices."""
    xy = space.node_coords
    fx, fy = f(xy[..., 0], xy[..., 1])
    shape = xy.shape[:2]
    coeffs = np.stack([np.broadcast_to(np.asarray(fx, dtype=float), shape),
                       np.broadcast_to(np.asarray(fy, dtype=float), shape)], axis=1)
    return Field(space, coeffs.ravel())


# --- Evaluation ---

def evaluate_at_barycentric(field: Field, bary: np.ndarray) -> np.ndarray:
    """
    Field values at barycentric points in every element.

    Returns (m, q) for a scalar field, (m, q, 2) for a vector field.
    """
    bary = np.atleast_2d(bary)
    if field.is_vector:
        comps = field.space.components(field.coefficients)          # (m, 2, 3)
        return np.einsum("qa,mca->mqc", p1_values(bary), comps)
    local = field.coefficients[field.space.cell_dofs]                 # (m, 6)
    return local @ p2_values(bary).T


def pointwise_gradient(h: Field, v_space: P1DGVectorSpace | None = None) -> Field:
    """Exact gradient of the local quadratic of h at each element's vertices."""
    if h.is_vector:
        raise ConfigError("pointwise_gradient needs a P2 scalar field")
    mesh = h.space.mesh
    v_space = v_space or P1DGVectorSpace(mesh)
    maps = affine_maps(mesh)
    ref = p2_gradients(P1_NODES)                                    # (3 nodes, 6, 2)
    local = h.coefficients[h.space.cell_dofs]                          # (m, 6)
    ref_grad = np.einsum("mj,ajd->mad", local, ref)                   # (m, 3, 2)
    grad = np.einsum("mcd,mad->mca", maps.inverse_transposes, ref_grad)
    return Field(v_space, grad.ravel())


# --- Norms ---

def _integrate_squared(field: Field, exact=None, degree: int = NORM_QUADRATURE_DEGREE,
                       levels: int = 0) -> float:
    mesh = field.space.mesh
    rule = composite_quadrature(degree, levels)
    values = evaluate_at_barycentric(field, rule.points)
    if exact is not None:
        pts = physical_points(mesh, rule.points)
        ref = exact(pts[..., 0], pts[..., 1])
        if field.is_vector:
            ref = np.stack([np.broadcast_to(np.asarray(c, dtype=float), pts.shape[:2]) for c in ref],
                           axis=-1)
        values = values - ref
    sq = values ** 2
    if field.is_vector:
        sq = sq.sum(axis=-1)
    det = np.abs(affine_maps(mesh).determinants)
    return float(np.dot(det, sq @ rule.weights))


def l2_norm(field: Field, degree: int = NORM_QUADRATURE_DEGREE) -> float:
    return float(np.sqrt(_integrate_squared(field, degree=degree)))


def l2_error(field: Field, exact, degree: int = NORM_QUADRATURE_DEGREE,
             levels: int = ERROR_SUBDIVISIONS) -> float:
    """L2 distance to a pointwise function f(x, y) (returning (fx, fy) for vectors)."""
    return float(np.sqrt(_integrate_squared(field, exact, degree=degree, levels=levels)))
