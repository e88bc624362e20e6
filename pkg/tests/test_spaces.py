"""Quadrature, reference basis, the P2 / P1DG spaces, interpolation and norms."""

import math

import numpy as np
import pytest

from src.errors import ConfigError
from src.mesh.build import build_rectangle_mesh, refine_uniform
from src.spaces.basis import P1_NODES, P2_NODES, p1_values, p2_gradients, p2_values
from src.spaces.function_space import (
    Field, P1DGVectorSpace, P2ScalarSpace, evaluate_at_barycentric, interpolate_scalar,
    interpolate_vector, l2_error, l2_norm, physical_points, pointwise_gradient, zero_field,
)
from src.spaces.quadrature import (
    AVAILABLE_DEGREES, composite_quadrature, get_quadrature, integrate_reference,
    monomial_integral,
)


# --- Quadrature ---

@pytest.mark.parametrize("degree", AVAILABLE_DEGREES)
def test_quadrature_exact_on_monomials(degree):
    rule = get_quadrature(degree)
    assert rule.weights.sum() == pytest.approx(0.5, abs=1e-15)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            got = integrate_reference(rule, lambda x, y: x ** a * y ** b)
            assert got == pytest.approx(monomial_integral(a, b), rel=1e-13)


def test_quadrature_points_inside_reference():
    for degree in AVAILABLE_DEGREES:
        rule = get_quadrature(degree)
        assert (rule.points > 0).all()
        np.testing.assert_allclose(rule.points.sum(axis=1), 1.0, atol=1e-15)


def test_quadrature_picks_cheapest_rule():
    assert get_quadrature(3).degree == 4
    assert get_quadrature(5).n_points == 12
    with pytest.raises(ConfigError):
        get_quadrature(9)


def test_composite_rule_keeps_exactness():
    rule = composite_quadrature(6, 2)
    assert rule.n_points == 16 * 12
    assert rule.weights.sum() == pytest.approx(0.5, abs=1e-15)
    assert (rule.points > 0).all()
    for a, b in [(0, 0), (3, 2), (0, 6), (4, 2)]:
        got = integrate_reference(rule, lambda x, y: x ** a * y ** b)
        assert got == pytest.approx(monomial_integral(a, b), rel=1e-13)
    np.testing.assert_array_equal(composite_quadrature(6, 0).points, get_quadrature(6).points)


def test_composite_rule_improves_smooth_integrand():
    # int exp(3(xi + eta)) over the reference triangle = int_0^1 s e^{3s} ds
    exact = (2 * math.exp(3.0) + 1) / 9
    f = lambda x, y: np.exp(3 * (x + y))
    single = abs(integrate_reference(get_quadrature(6), f) - exact)
    split = abs(integrate_reference(composite_quadrature(6, 1), f) - exact)
    assert split < single / 50
    with pytest.raises(ConfigError):
        composite_quadrature(6, -1)


# --- Basis ---

def _random_bary(n, seed=0):
    rng = np.random.default_rng(seed)
    lam = rng.dirichlet(np.ones(3), size=n)
    return lam


def test_p2_partition_of_unity():
    lam = _random_bary(50)
    np.testing.assert_allclose(p2_values(lam).sum(axis=1), 1.0, atol=1e-14)
    np.testing.assert_allclose(p2_gradients(lam).sum(axis=1), 0.0, atol=1e-13)


def test_p2_kronecker_at_nodes():
    np.testing.assert_allclose(p2_values(P2_NODES), np.eye(6), atol=1e-15)


def test_p1_kronecker_at_nodes():
    np.testing.assert_array_equal(p1_values(P1_NODES), np.eye(3))


def test_p2_gradients_match_finite_differences():
    lam = _random_bary(10, seed=4)
    eps = 1e-6
    g = p2_gradients(lam)
    for d in range(2):
        shift = np.zeros(3)
        shift[0] = -eps
        shift[d + 1] = eps
        fd = (p2_values(lam + shift) - p2_values(lam - shift)) / (2 * eps)
        np.testing.assert_allclose(g[:, :, d], fd, atol=1e-8)


# --- Spaces ---

def test_space_sizes(square2):
    s = P2ScalarSpace(square2)
    v = P1DGVectorSpace(square2)
    assert s.n_dofs == 4 + 5
    assert v.n_dofs == 12
    assert sorted(s.boundary_dofs.tolist()) == sorted(
        [0, 1, 2, 3] + [4 + e for e in square2.boundary_edge_ids.tolist()])


def test_p2_nodes_match_local_order(test_mesh):
    s = P2ScalarSpace(test_mesh)
    mapped = physical_points(test_mesh, P2_NODES)
    np.testing.assert_allclose(mapped, s.node_coords[s.cell_dofs], atol=1e-14)


def test_dg_dof_layout(square2):
    v = P1DGVectorSpace(square2)
    coeffs = np.arange(12.0)
    comps = v.components(coeffs)
    assert comps[1, 0, 2] == 6 + 2
    assert comps[1, 1, 0] == 6 + 3


def test_field_rejects_wrong_length(square2):
    with pytest.raises(ConfigError):
        Field(P2ScalarSpace(square2), np.zeros(3))


def test_field_arithmetic(square2):
    s = P2ScalarSpace(square2)
    a = interpolate_scalar(s, lambda x, y: x)
    b = interpolate_scalar(s, lambda x, y: y)
    np.testing.assert_allclose((2 * a - b).coefficients, 2 * s.node_coords[:, 0] - s.node_coords[:, 1])
    assert not zero_field(s).coefficients.any()


# --- Interpolation ---

def test_interpolate_constant(test_mesh):
    h = interpolate_scalar(P2ScalarSpace(test_mesh), lambda x, y: 3.0)
    np.testing.assert_array_equal(h.coefficients, 3.0)


def test_p2_reproduces_quadratics(test_mesh):
    f = lambda x, y: 1 + 2 * x - y + x * x - 3 * x * y + 0.5 * y * y
    h = interpolate_scalar(P2ScalarSpace(test_mesh), f)
    lam = _random_bary(7, seed=1)
    values = evaluate_at_barycentric(h, lam)
    pts = physical_points(test_mesh, lam)
    np.testing.assert_allclose(values, f(pts[..., 0], pts[..., 1]), atol=1e-12)


def test_p1dg_reproduces_linears(test_mesh):
    f = lambda x, y: (1 + x - 2 * y, 3 * y - x)
    u = interpolate_vector(P1DGVectorSpace(test_mesh), f)
    lam = _random_bary(5, seed=2)
    values = evaluate_at_barycentric(u, lam)
    pts = physical_points(test_mesh, lam)
    fx, fy = f(pts[..., 0], pts[..., 1])
    np.testing.assert_allclose(values[..., 0], fx, atol=1e-12)
    np.testing.assert_allclose(values[..., 1], fy, atol=1e-12)


def test_p1dg_allows_jumps(square2):
    v = P1DGVectorSpace(square2)
    comps = np.zeros((2, 2, 3))
    comps[0, 0] = 1.0
    comps[1, 0] = -1.0
    u = Field(v, comps.ravel())
    # Vertex 0 is node 0 of both triangles
    at_vertex0 = evaluate_at_barycentric(u, P1_NODES[:1])
    assert at_vertex0[0, 0, 0] == 1.0
    assert at_vertex0[1, 0, 0] == -1.0


# --- Norms ---

def test_l2_norm_of_constant(test_mesh):
    h = interpolate_scalar(P2ScalarSpace(test_mesh), lambda x, y: 2.0)
    assert l2_norm(h) == pytest.approx(2.0 * math.sqrt(test_mesh.total_area), rel=1e-13)


def test_l2_norm_exact_polynomials():
    mesh = build_rectangle_mesh((0, 1), (0, 1), 0.5)
    h = interpolate_scalar(P2ScalarSpace(mesh), lambda x, y: x * x + y)
    assert l2_norm(h) ** 2 == pytest.approx(13 / 15, rel=1e-13)
    u = interpolate_vector(P1DGVectorSpace(mesh), lambda x, y: (x, y))
    assert l2_norm(u) ** 2 == pytest.approx(2 / 3, rel=1e-13)


def test_l2_error_of_exact_interpolant(test_mesh):
    f = lambda x, y: x * y - 2 * y * y
    h = interpolate_scalar(P2ScalarSpace(test_mesh), f)
    assert l2_error(h, f) < 1e-12


def test_l2_error_matches_fine_oracle():
    mesh = build_rectangle_mesh((0, 1), (0, 1), 0.1)
    f = lambda x, y: np.sin(np.pi * x)
    h = interpolate_scalar(P2ScalarSpace(mesh), f)
    got = l2_error(h, f)

    # Oracle: the same interpolant sampled on four levels of sub-triangles
    rule = get_quadrature(6)
    lam = rule.points
    total = 0.0
    fine_bary = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    subs = [fine_bary]
    for _ in range(4):
        nxt = []
        for t in subs:
            m01, m12, m20 = (t[0] + t[1]) / 2, (t[1] + t[2]) / 2, (t[2] + t[0]) / 2
            nxt += [np.array([t[0], m01, m20]), np.array([m01, t[1], m12]),
                    np.array([m20, m12, t[2]]), np.array([m01, m12, m20])]
        subs = nxt
    for t in subs:
        bary = lam @ t
        values = evaluate_at_barycentric(h, bary)
        pts = physical_points(mesh, bary)
        sq = (values - f(pts[..., 0], pts[..., 1])) ** 2
        total += float(np.dot(mesh.areas * 2 / len(subs), sq @ rule.weights))
    # Three significant figures
    assert got == pytest.approx(math.sqrt(total), rel=1e-3)


def test_interpolation_error_converges():
    # Coast-trapped Gaussian on the channel of the convergence study
    f = lambda x, y: np.exp(-y / 0.1) * np.exp(-(x - 5) ** 2)
    coarse = build_rectangle_mesh((-15, 15), (0, 3), 0.2)
    fine = refine_uniform(coarse)
    e_coarse = l2_error(interpolate_scalar(P2ScalarSpace(coarse), f), f)
    e_fine = l2_error(interpolate_scalar(P2ScalarSpace(fine), f), f)
    assert e_coarse / e_fine > 3.5


# --- Pointwise gradient ---

def test_pointwise_gradient_of_quadratic(test_mesh):
    f = lambda x, y: x * x + x * y - 2 * y
    grad = lambda x, y: (2 * x + y, x - 2)
    q = pointwise_gradient(interpolate_scalar(P2ScalarSpace(test_mesh), f))
    assert q.is_vector
    assert l2_error(q, grad) < 1e-11
    expected = interpolate_vector(P1DGVectorSpace(test_mesh), grad)
    np.testing.assert_allclose(q.coefficients, expected.coefficients, atol=1e-11)


def test_pointwise_gradient_rejects_vectors(square2):
    with pytest.raises(ConfigError):
        pointwise_gradient(zero_field(P1DGVectorSpace(square2)))
