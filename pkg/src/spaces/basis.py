"""
Reference-element basis functions.

P2 local order: vertex functions 0, 1, 2, then the midpoint function of the
edge opposite vertex i at local index 3 + i (edges (1,2), (2,0), (0,1)):

    phi_i     = l_i (2 l_i - 1)
    phi_{3+i} = 4 l_j l_k

P1 (used per component by the DG velocity) is simply phi_a = l_a.
Gradients are with respect to the reference coordinates (xi, eta).
"""

from dataclasses import dataclass

import numpy as np

from src.mesh.mesh import LOCAL_EDGES
from src.spaces.quadrature import QuadratureRule

# d(lambda_a)/d(xi, eta)
BARYCENTRIC_GRADIENTS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])

# Barycentric coordinates of the six P2 nodes in local order
P2_NODES = np.array([
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
    [0.5, 0.5, 0.0],
])

# P1DG nodes sit at the element vertices
P1_NODES = P2_NODES[:3]


@dataclass(frozen=True, eq=False)
class BasisTable:
    """Values (q, n) and reference gradients (q, n, 2) at a set of points."""
    values: np.ndarray
    gradients: np.ndarray


def p2_values(bary: np.ndarray) -> np.ndarray:
    lam = np.atleast_2d(bary)
    out = np.empty((len(lam), 6))
    out[:, :3] = lam * (2.0 * lam - 1.0)
    for i, (j, k) in enumerate(LOCAL_EDGES):
        out[:, 3 + i] = 4.0 * lam[:, j] * lam[:, k]
    return out


def p2_gradients(bary: np.ndarray) -> np.ndarray:
    lam = np.atleast_2d(bary)
    g = BARYCENTRIC_GRADIENTS
    out = np.empty((len(lam), 6, 2))
    for i in range(3):
        out[:, i] = (4.0 * lam[:, i] - 1.0)[:, None] * g[i]
    for i, (j, k) in enumerate(LOCAL_EDGES):
        out[:, 3 + i] = 4.0 * (lam[:, k, None] * g[j] + lam[:, j, None] * g[k])
    return out


def p1_values(bary: np.ndarray) -> np.ndarray:
    return np.array(np.atleast_2d(bary), dtype=float)


def p1_gradients(bary: np.ndarray) -> np.ndarray:
    n = len(np.atleast_2d(bary))
    return np.broadcast_to(BARYCENTRIC_GRADIENTS, (n, 3, 2)).copy()


def tabulate_p2_basis(rule: QuadratureRule) -> BasisTable:
    return BasisTable(values=p2_values(rule.points), gradients=p2_gradients(rule.points))


def tabulate_p1_basis(rule: QuadratureRule) -> BasisTable:
    return BasisTable(values=p1_values(rule.points), gradients=p1_gradients(rule.points))
