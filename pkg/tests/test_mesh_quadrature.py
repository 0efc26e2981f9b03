import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nitsche_xfem.mesh import TriangleMesh, build_hierarchy
from nitsche_xfem.quadrature import (
    quadrature_for_part,
    quadrature_for_segment,
    segment_rule_batch,
    signed_areas,
    triangle_rule_batch,
)

REF = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def monomial_integral(a, b):
    # int_{ref triangle} x^a y^b = a! b! / (a + b + 2)!
    from math import factorial

    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("degree", [1, 2, 5])
def test_triangle_rules_exact_on_monomials(degree):
    pts, w = triangle_rule_batch(REF[None], degree)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            q = np.sum(w[0] * pts[0, :, 0] ** a * pts[0, :, 1] ** b)
            assert q == pytest.approx(monomial_integral(a, b), rel=1e-13, abs=1e-15)


def test_unknown_degree():
    with pytest.raises(ValueError):
        triangle_rule_batch(REF[None], 4)


def test_segment_rule_exact_for_cubics():
    pts, w = segment_rule_batch(np.array([[[0.0, 0.0], [2.0, 0.0]]]))
    assert np.sum(w * pts[..., 0] ** 3) == pytest.approx(4.0, rel=1e-14)


def test_segment_coincident_endpoints():
    with pytest.raises(ValueError):
        quadrature_for_segment([[0.3, 0.3], [0.3, 0.3]])


def test_part_rule_skips_degenerate():
    part = np.array([REF, [[0, 0], [1, 0], [2, 0]]], dtype=float)
    rule = quadrature_for_part(part)
    assert rule.measure == pytest.approx(0.5)
    assert rule.integrate(lambda x, y: x) == pytest.approx(1.0 / 6.0)


def test_structured_mesh_numbering():
    m = TriangleMesh.structured(2)
    assert m.n_vertices == 9 and m.n_elements == 8
    # cell (1, 0): lower element 2, upper element 3
    assert list(m.triangles[2]) == [1, 2, 5]
    assert list(m.triangles[3]) == [1, 5, 4]
    assert np.all(m.areas > 0)
    assert m.areas.sum() == pytest.approx(1.0)
    assert m.h == pytest.approx(np.sqrt(2) / 2)


def test_gradients_reproduce_linear_functions():
    m = TriangleMesh.structured(3)
    f = 2.0 * m.vertices[:, 0] - 3.0 * m.vertices[:, 1]
    grad = np.einsum("ekd,ek->ed", m.gradients, f[m.triangles])
    assert np.allclose(grad, [2.0, -3.0])
    # partition of unity of the basis
    pts = m.coords.mean(axis=1)
    assert np.allclose(m.basis_values(np.arange(m.n_elements), pts).sum(axis=1), 1.0)


@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 9))
def test_locate_contains_point(x, y, n):
    m = TriangleMesh.structured(n)
    e = m.locate(np.array([[x, y]]))[0]
    phi = m.basis_values(np.array(e), np.array([x, y]))
    assert np.all(phi >= -1e-12)


def test_edges_and_boundary():
    m = TriangleMesh.structured(4)
    e = m.edges
    # Euler: E = V + F - 1 for a simply connected triangulation
    assert len(e.vertices) == m.n_vertices + m.n_elements - 1
    assert np.count_nonzero(e.right < 0) == 16
    assert len(m.boundary_vertices) == 16
    # edge k of an element is opposite local vertex k
    k = 0
    v = e.vertices[e.of_element[5, k]]
    assert m.triangles[5, k] not in v


def test_hierarchy_parents():
    h = build_hierarchy(3, 3)
    assert [m.n for m in h.levels] == [3, 6, 12]
    fine, coarse = h.levels[2], h.levels[1]
    # every fine element lies inside its parent
    c = fine.coords.mean(axis=1)
    phi = coarse.basis_values(fine.parent, c)
    assert np.all(phi > 0)
    assert np.all(np.bincount(fine.parent, minlength=coarse.n_elements) == 4)
    assert len(h.children(0, 0)) == 4


@pytest.mark.parametrize("n", [0, -1])
def test_invalid_sizes(n):
    with pytest.raises(ValueError):
        TriangleMesh.structured(n)
    with pytest.raises(ValueError):
        build_hierarchy(n, 2)


def test_signed_area_orientation():
    assert signed_areas(REF) == pytest.approx(0.5)
    assert signed_areas(REF[::-1]) == pytest.approx(-0.5)
