import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opencavity import fem


def test_p1_vertex_values():
    b = fem.eval_basis(fem.P1, (0.0, 0.0))
    assert np.allclose(b.values, [1, 0, 0])


@pytest.mark.parametrize("point,idx", [((0.5, 0.0), 3), ((0.5, 0.5), 4), ((0.0, 0.5), 5)])
def test_p2_midpoint_lagrange(point, idx):
    b = fem.eval_basis(fem.P2, point)
    expected = np.zeros(6)
    expected[idx] = 1.0
    assert np.allclose(b.values, expected, atol=1e-15)


def test_p2_centroid_values():
    b = fem.eval_basis(fem.P2, (1 / 3, 1 / 3))
    assert np.allclose(b.values[:3], -1 / 9)
    assert np.allclose(b.values[3:], 4 / 9)


def test_point_outside_rejected():
    with pytest.raises(ValueError):
        fem.eval_basis(fem.P2, (0.8, 0.8))


coords = st.floats(0.0, 1.0, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(coords, coords)
def test_partition_of_unity(x, y):
    if x + y > 1:
        x, y = 1 - x, 1 - y
    for family in (fem.P1, fem.P2):
        b = fem.eval_basis(family, (x, y))
        assert abs(b.values.sum() - 1) < 1e-14
        assert np.abs(b.gradients.sum(axis=0)).max() < 1e-13


def test_gradients_match_finite_differences(rng):
    pts = rng.random((20, 2)) * 0.45 + 0.05
    h = 1e-6
    for family in (fem.P1, fem.P2):
        g = fem.basis_gradients(family, pts)
        gx = (fem.basis_values(family, pts + [h, 0]) - fem.basis_values(family, pts - [h, 0])) / (2 * h)
        gy = (fem.basis_values(family, pts + [0, h]) - fem.basis_values(family, pts - [0, h])) / (2 * h)
        assert np.allclose(g[..., 0], gx, atol=1e-8)
        assert np.allclose(g[..., 1], gy, atol=1e-8)


def monomial(a, b):
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@pytest.mark.parametrize("degree", [1, 2, 4, 5])
def test_triangle_rule_exactness(degree):
    rule = fem.triangle_quadrature(degree)
    assert np.all(rule.weights > 0)
    assert abs(rule.weights.sum() - 0.5) < 1e-15
    x, y = rule.points.T
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            assert abs(rule.weights @ (x ** a * y ** b) - monomial(a, b)) < 1e-15


def test_triangle_rule_examples():
    rule = fem.triangle_quadrature(4)
    x, y = rule.points.T
    assert abs(rule.weights.sum() - 0.5) < 1e-15
    assert abs(rule.weights @ (x + y) - 1 / 3) < 1e-15
    assert abs(rule.weights @ (x ** 2 * y) - 1 / 60) < 1e-15


def test_unsupported_triangle_degree():
    with pytest.raises(ValueError):
        fem.triangle_quadrature(9)


@pytest.mark.parametrize("degree", [1, 3, 5, 6, 7])
def test_edge_rule_exactness(degree):
    rule = fem.edge_quadrature(degree)
    assert np.all(rule.weights > 0) and abs(rule.weights.sum() - 1) < 1e-15
    for p in range(degree + 1):
        assert abs(rule.weights @ rule.points ** p - 1 / (p + 1)) < 1e-15


def test_edge_rule_examples():
    assert abs(fem.edge_quadrature(5).weights @ fem.edge_quadrature(5).points ** 3 - 0.25) < 1e-15
    r = fem.edge_quadrature(6)
    assert abs(r.weights @ r.points ** 6 - 1 / 7) < 1e-15
    assert len(fem.edge_quadrature(7).points) == 4


def test_edge_p2_trace_is_lagrange():
    v = fem.edge_p2_values(np.array([0.0, 1.0, 0.5]))
    assert np.allclose(v, np.eye(3))


@pytest.mark.parametrize("tri,det", [
    ([(0, 0), (1, 0), (0, 1)], 1.0),
    ([(0, 0), (2, 0), (0, 2)], 4.0),
    ([(0, 0), (1, 0), (0, 2)], 2.0),
])
def test_map_to_physical_det(tri, det):
    x, jac, d = fem.map_to_physical(np.array(tri, float), (0.25, 0.25))
    assert abs(d - det) < 1e-15
    if det == 1.0:
        assert np.allclose(jac, np.eye(2))


def test_degenerate_triangle_rejected():
    with pytest.raises(ValueError):
        fem.map_to_physical(np.array([(0, 0), (1, 1), (2, 2)], float), (0.2, 0.2))


def test_physical_gradient_of_linear_function(rng):
    tri = np.array([(0.3, 0.1), (1.2, 0.4), (0.5, 1.3)])
    geo = fem.ElementGeometry.from_coordinates(tri[None])
    g_ref = fem.basis_gradients(fem.P1, np.array([[0.2, 0.3]]))[0]
    grad = geo.inv_jac_t[0] @ g_ref.T  # (2, 3)
    # nodal values of f = 2x - 3y reproduce its gradient
    f = 2 * tri[:, 0] - 3 * tri[:, 1]
    assert np.allclose(grad @ f, [2, -3])
