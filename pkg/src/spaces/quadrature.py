"""
Symmetric quadrature rules on the reference triangle (0,0), (1,0), (0,1).

Points are stored as barycentric coordinates (lambda0, lambda1, lambda2) with
reference coordinates xi = lambda1, eta = lambda2. Weights sum to the
reference area 1/2, so a physical integral is detJ * sum(w * f).

Degree 4 (6 points) is exact for every bilinear form in the package on
affine triangles; degree 6 (12 points) is used for L2 norms, and its
composite form over refined sub-triangles for errors against analytic functions.
"""

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

from src.errors import ConfigError

REFERENCE_AREA = 0.5


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Barycentric points (q, 3), weights (q,) summing to 1/2, exactness degree."""
    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def n_points(self) -> int:
        return len(self.weights)

    @property
    def reference_points(self) -> np.ndarray:
        """(xi, eta) of each point, shape (q, 2)."""
        return self.points[:, 1:]


def _orbit(a: float, b: float, c: float) -> list[tuple[float, float, float]]:
    """Distinct permutations of a barycentric triple."""
    seen = []
    for p in ((a, b, c), (b, c, a), (c, a, b), (a, c, b), (c, b, a), (b, a, c)):
        if p not in seen:
            seen.append(p)
    return seen


def _symmetric_rule(orbits: list[tuple[float, tuple[float, float, float]]], degree: int) -> QuadratureRule:
    points, weights = [], []
    for weight, triple in orbits:
        for p in _orbit(*triple):
            points.append(p)
            weights.append(weight * REFERENCE_AREA)
    pts = np.array(points)
    wts = np.array(weights)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(points=pts, weights=wts, degree=degree)


# Weights below are normalised to sum to 1 and scaled by the reference area.
_D4_A = 0.44594849091596488632
_D4_B = 0.09157621350977074346
_D6_A = 0.24928674517091042129
_D6_B = 0.06308901449150222834
_D6_C = (0.05314504984481694735, 0.31035245103378440542, 0.63650249912139864723)

_RULES = {
    1: [(1.0, (1 / 3, 1 / 3, 1 / 3))],
    2: [(1 / 3, (2 / 3, 1 / 6, 1 / 6))],
    4: [
        (0.22338158967801146570, (1 - 2 * _D4_A, _D4_A, _D4_A)),
        (0.10995174365532186764, (1 - 2 * _D4_B, _D4_B, _D4_B)),
    ],
    6: [
        (0.11678627572637936603, (1 - 2 * _D6_A, _D6_A, _D6_A)),
        (0.05084490637020681692, (1 - 2 * _D6_B, _D6_B, _D6_B)),
        (0.08285107561837357519, _D6_C),
    ],
}

AVAILABLE_DEGREES = tuple(sorted(_RULES))


@lru_cache(maxsize=None)
def get_quadrature(degree: int) -> QuadratureRule:
    """Cheapest tabulated rule exact to at least `degree`."""
    for d in AVAILABLE_DEGREES:
        if d >= degree:
            return _symmetric_rule(_RULES[d], d)
    raise ConfigError(f"no quadrature rule of degree {degree}; max is {AVAILABLE_DEGREES[-1]}")


def _split(corners: np.ndarray) -> list[np.ndarray]:
    c0, c1, c2 = corners
    m01, m12, m20 = (c0 + c1) / 2, (c1 + c2) / 2, (c2 + c0) / 2
    return [np.array([c0, m01, m20]), np.array([m01, c1, m12]),
            np.array([m20, m12, c2]), np.array([m01, m12, m20])]


@lru_cache(maxsize=None)
def composite_quadrature(degree: int, levels: int) -> QuadratureRule:
    """
    get_quadrature(degree) repeated on the 4**levels sub-triangles of uniform
    midpoint refinement. Same polynomial degree, much smaller error on smooth
    non-polynomial integrands (analytic exact solutions in L2 errors).
    """
    if levels < 0:
        raise ConfigError(f"subdivision levels must be >= 0, got {levels}")
    base = get_quadrature(degree)
    pieces = [np.eye(3)]
    for _ in range(levels):
        pieces = [sub for piece in pieces for sub in _split(piece)]
    pts = np.concatenate([base.points @ piece for piece in pieces])
    wts = np.tile(base.weights / len(pieces), len(pieces))
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(points=pts, weights=wts, degree=base.degree)


def monomial_integral(a: int, b: int) -> float:
    """Exact integral of xi^a eta^b over the reference triangle: a! b! / (a+b+2)!."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def integrate_reference(rule: QuadratureRule, f) -> float:
    """Apply a rule to f(xi, eta) on the reference triangle."""
    xi, eta = rule.reference_points.T
    return float(np.dot(rule.weights, f(xi, eta)))
