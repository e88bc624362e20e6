"""
Assembly of the discrete operators of the linear rotating shallow-water system.

    M_h  (P2 x P2)       (M_h)_ij = int phi_i phi_j              SPD
    M_u  (P1DG blocks)   int w . u                               SPD, two P1 mass blocks
    C    (P1DG blocks)   int w . (k x u),  k x u = (-u_y, u_x)    skew
    G    (P1DG x P2)     G_ij = int N_i . grad phi_j
    K    (P2 x P2)       K_ij = +int grad phi_i . grad phi_j      symmetric PSD, kernel = constants

Sign table for the weak equations (nothing below is baked into the matrices):

    M_u du/dt + (1/Ro) C u + (1/Fr^2) G h = 0
    M_h dh/dt - G^T u                     = 0

    L = G^T M_u^{-1} G equals K (not -K): int grad phi . grad h needs no
    boundary term because u.n = 0 is imposed only by dropping the boundary
    integral from the continuity equation.

Every integrand has degree <= 4 on an affine triangle, so the 6-point rule
makes all entries exact up to round-off. Scattering to global indices uses
COO triplets converted to CSR, which sums duplicates.
"""

from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import structlog

from src.errors import ConfigError
from src.mesh.mesh import Mesh
from src.operators.blocks import ElementBlockOperator
from src.spaces.basis import tabulate_p1_basis, tabulate_p2_basis
from src.spaces.function_space import (
    Field, P1DGVectorSpace, P2ScalarSpace, affine_maps,
)
from src.spaces.quadrature import get_quadrature

logger = structlog.get_logger("operators.assembly")

ASSEMBLY_QUADRATURE_DEGREE = 4

SparseOperator = sp.csr_matrix


@lru_cache(maxsize=None)
def _reference_tables():
    rule = get_quadrature(ASSEMBLY_QUADRATURE_DEGREE)
    p2 = tabulate_p2_basis(rule)
    p1 = tabulate_p1_basis(rule)
    w = rule.weights
    p2_mass = np.einsum("q,qi,qj->ij", w, p2.values, p2.values)
    p1_mass = np.einsum("q,qa,qb->ab", w, p1.values, p1.values)
    return rule, p2, p1, p2_mass, p1_mass


def _scatter(local: np.ndarray, rows: np.ndarray, cols: np.ndarray,
             shape: tuple[int, int]) -> sp.csr_matrix:
    """Sum element matrices local (m, r, c) into a global CSR matrix."""
    r = np.broadcast_to(rows[:, :, None], local.shape).ravel()
    c = np.broadcast_to(cols[:, None, :], local.shape).ravel()
    matrix = sp.coo_matrix((local.ravel(), (r, c)), shape=shape).tocsr()
    matrix.sum_duplicates()
    return matrix


def _physical_p2_gradients(mesh: Mesh) -> np.ndarray:
    """grad phi_j at each quadrature point, shape (m, q, 6, 2)."""
    _, p2, _, _, _ = _reference_tables()
    maps = affine_maps(mesh)
    return np.einsum("mcd,qjd->mqjc", maps.inverse_transposes, p2.gradients)


def _abs_det(mesh: Mesh) -> np.ndarray:
    return np.abs(affine_maps(mesh).determinants)


# --- Element matrices ---

def element_scalar_mass(mesh: Mesh) -> np.ndarray:
    _, _, _, p2_mass, _ = _reference_tables()
    return _abs_det(mesh)[:, None, None] * p2_mass


def element_stiffness(mesh: Mesh) -> np.ndarray:
    rule, *_ = _reference_tables()
    grads = _physical_p2_gradients(mesh)
    return np.einsum("q,m,mqic,mqjc->mij", rule.weights, _abs_det(mesh), grads, grads)


def element_p1_mass(mesh: Mesh) -> np.ndarray:
    _, _, _, _, p1_mass = _reference_tables()
    return _abs_det(mesh)[:, None, None] * p1_mass


def element_gradient(mesh: Mesh) -> np.ndarray:
    """(m, 6, 6): row 3*c + a (component c, DG node a), column local P2 dof j."""
    rule, _, p1, _, _ = _reference_tables()
    grads = _physical_p2_gradients(mesh)
    local = np.einsum("q,m,qa,mqjc->mcaj", rule.weights, _abs_det(mesh), p1.values, grads)
    return local.reshape(mesh.n_triangles, 6, 6)


# --- Global operators ---

def assemble_scalar_mass(space: P2ScalarSpace) -> sp.csr_matrix:
    dofs = space.cell_dofs
    return _scatter(element_scalar_mass(space.mesh), dofs, dofs, (space.n_dofs, space.n_dofs))


def assemble_stiffness(space: P2ScalarSpace) -> sp.csr_matrix:
    dofs = space.cell_dofs
    return _scatter(element_stiffness(space.mesh), dofs, dofs, (space.n_dofs, space.n_dofs))


def assemble_vector_mass(space: P1DGVectorSpace) -> ElementBlockOperator:
    m1 = element_p1_mass(space.mesh)
    blocks = np.zeros((space.mesh.n_triangles, 6, 6))
    blocks[:, :3, :3] = m1
    blocks[:, 3:, 3:] = m1
    return ElementBlockOperator(blocks)


def assemble_coriolis(space: P1DGVectorSpace) -> ElementBlockOperator:
    """w . (k x u): test-x pairs with -u_y, test-y with +u_x."""
    m1 = element_p1_mass(space.mesh)
    blocks = np.zeros((space.mesh.n_triangles, 6, 6))
    blocks[:, :3, 3:] = -m1
    blocks[:, 3:, :3] = m1
    return ElementBlockOperator(blocks)


def assemble_gradient(v_space: P1DGVectorSpace, s_space: P2ScalarSpace) -> sp.csr_matrix:
    if v_space.mesh is not s_space.mesh:
        raise ConfigError("gradient operator needs both spaces on the same mesh")
    return _scatter(element_gradient(s_space.mesh), v_space.cell_dofs, s_space.cell_dofs,
                    (v_space.n_dofs, s_space.n_dofs))


@dataclass(frozen=True, eq=False)
class OperatorSet:
    """All assembled operators for one mesh. Immutable and shareable."""
    s_space: P2ScalarSpace
    v_space: P1DGVectorSpace
    Mh: sp.csr_matrix
    Mu: ElementBlockOperator
    C: ElementBlockOperator
    G: sp.csr_matrix
    K: sp.csr_matrix

    @property
    def mesh(self) -> Mesh:
        return self.s_space.mesh

    @cached_property
    def Gt(self) -> sp.csr_matrix:
        return self.G.T.tocsr()

    @cached_property
    def Mu_inverse(self) -> ElementBlockOperator:
        return self.Mu.inverse()

    @cached_property
    def mass_solve(self):
        """Factorised M_h^{-1} applied to a vector."""
        return spla.splu(self.Mh.tocsc()).solve


def assemble_operators(mesh: Mesh) -> OperatorSet:
    s_space = P2ScalarSpace(mesh)
    v_space = P1DGVectorSpace(mesh)
    ops = OperatorSet(
        s_space=s_space,
        v_space=v_space,
        Mh=assemble_scalar_mass(s_space),
        Mu=assemble_vector_mass(v_space),
        C=assemble_coriolis(v_space),
        G=assemble_gradient(v_space, s_space),
        K=assemble_stiffness(s_space),
    )
    logger.info("operators_assembled", n_elements=mesh.n_triangles,
                n_p2_dofs=s_space.n_dofs, n_dg_dofs=v_space.n_dofs,
                nnz_g=int(ops.G.nnz), nnz_k=int(ops.K.nnz))
    return ops


# --- Derived operators ---

def discrete_gradient(Mu: ElementBlockOperator, G: sp.csr_matrix, h: Field,
                      v_space: P1DGVectorSpace | None = None) -> Field:
    """q = M_u^{-1} G h, one dense solve per element."""
    v_space = v_space or P1DGVectorSpace(h.space.mesh)
    return Field(v_space, Mu.solve(G @ h.coefficients))


def discrete_laplacian(Mu: ElementBlockOperator, G: sp.csr_matrix,
                       Mh: sp.csr_matrix | None = None) -> sp.csr_matrix:
    """L = G^T M_u^{-1} G (equal to K up to round-off)."""
    if Mh is not None and Mh.shape[0] != G.shape[1]:
        raise ConfigError(f"M_h is {Mh.shape}, G has {G.shape[1]} columns")
    Minv = Mu.inverse().to_sparse()
    return (G.T @ Minv @ G).tocsr()


def export_matrix_market(operator, path: str | Path, comment: str = "") -> Path:
    """Write an operator in Matrix Market coordinate format."""
    path = Path(path)
    if path.suffix != ".mtx":
        path = path.with_name(path.name + ".mtx")   # mmwrite would append it anyway
    path.parent.mkdir(parents=True, exist_ok=True)
    matrix = operator.to_sparse() if isinstance(operator, ElementBlockOperator) else operator
    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix), comment=comment, precision=17)
    logger.info("matrix_exported", path=str(path), shape=list(matrix.shape), nnz=int(matrix.nnz))
    return path
