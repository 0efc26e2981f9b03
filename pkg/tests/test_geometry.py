import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nitsche_xfem import problems
from nitsche_xfem.errors import GeometryError
from nitsche_xfem.geometry import LevelSetInterface, classify_and_cut, write_decomposition
from nitsche_xfem.mesh import TriangleMesh
from nitsche_xfem.quadrature import signed_areas
from nitsche_xfem.space import build_space

# dofs and element counts (enriched elements included) of the reference hierarchy
REFERENCE_COUNTS = {
    "linear": {100: (10403, 20200), 200: (40803, 80400), 400: (161603, 320800)},
    "circular": {100: (10767, 20566), 200: (41531, 81130), 400: (163063, 322262)},
}


def interface(kind):
    return LevelSetInterface.linear(problems.LINEAR_OFFSET) if kind == "linear" else problems.circle()


@pytest.mark.parametrize("kind", ["linear", "circular"])
@pytest.mark.parametrize("n", [100, 200])
def test_reference_hierarchy_counts(kind, n):
    d = classify_and_cut(TriangleMesh.structured(n), [interface(kind)])
    space = build_space(d)
    assert (space.n_dofs, d.mesh.n_elements + d.n_cut) == REFERENCE_COUNTS[kind][n]


def test_circle_radius_matches_counts():
    # r0 = sqrt(2) - 1, i.e. r0^2 = 3 - 2 sqrt(2)
    assert problems.RADIUS2 == pytest.approx((np.sqrt(2) - 1) ** 2)


def check_decomposition(d):
    mesh = d.mesh
    areas = mesh.areas[d.cut_elements]
    # parts tile the element
    assert np.allclose(d.part_areas.sum(axis=1), areas, rtol=1e-12)
    assert np.all(d.part_areas > 0)
    assert np.all(signed_areas(d.sub_triangles) >= -1e-18)
    # chord endpoints lie on element edges and on the interface (linear case)
    assert np.allclose(np.linalg.norm(d.normals, axis=1), 1.0)
    for c in range(d.n_cut):
        xy = mesh.coords[d.cut_elements[c]]
        itf = d.interfaces[d.cut_interface[c]]
        v = itf.side_value(xy[:, 0], xy[:, 1])
        # normal points from side 0 (positive) into side 1
        mid = d.segments[c].mean(axis=0)
        far = xy[np.argmin(v)]
        assert d.normals[c] @ (far - mid) > 0
        if itf.kind == "linear":
            assert np.allclose(d.segments[c][:, 0], itf.offset)


@pytest.mark.parametrize("kind", ["linear", "circular"])
def test_cut_geometry_consistent(kind):
    check_decomposition(classify_and_cut(TriangleMesh.structured(17), [interface(kind)]))


def test_circle_points_exactly_on_circle():
    d = classify_and_cut(TriangleMesh.structured(15), [problems.circle()])
    r2 = ((d.segments - 0.5) ** 2).sum(axis=2)
    assert np.allclose(r2, problems.RADIUS2, rtol=0, atol=1e-14)


def test_total_interface_length_converges():
    d = classify_and_cut(TriangleMesh.structured(200), [problems.circle()])
    assert d.segment_lengths.sum() == pytest.approx(2 * np.pi * np.sqrt(problems.RADIUS2), rel=1e-4)


def test_vertex_snapping():
    # interface through a column of vertices: no element is cut
    d = classify_and_cut(TriangleMesh.structured(4), [LevelSetInterface.linear(0.5 + 1e-13)])
    assert d.n_cut == 0
    assert set(np.unique(d.element_domain)) == {0, 1}


def test_no_interface_single_subdomain():
    d = classify_and_cut(TriangleMesh.structured(3), [])
    assert d.n_subdomains == 1 and d.n_cut == 0 and np.all(d.element_domain == 0)


def test_two_interfaces_in_one_element_rejected():
    itfs = [LevelSetInterface.linear(0.41), LevelSetInterface.linear(0.43)]
    with pytest.raises(GeometryError):
        classify_and_cut(TriangleMesh.structured(4), itfs)


def test_multi_interface_domains():
    d = classify_and_cut(TriangleMesh.structured(100), problems.multi_interface(4).interfaces)
    assert d.n_subdomains == 5
    centroids = d.mesh.coords.mean(axis=1)
    offs = sorted(problems.multi_interface_offsets(4))
    uncut = d.element_domain >= 0
    expected = np.searchsorted(offs, centroids[uncut, 0])
    assert np.array_equal(d.element_domain[uncut], expected)
    assert np.all(d.cut_domains[:, 1] == d.cut_domains[:, 0] + 1)


@given(st.floats(0.05, 0.95), st.integers(3, 12))
def test_linear_cut_property(offset, n):
    d = classify_and_cut(TriangleMesh.structured(n), [LevelSetInterface.linear(offset)])
    check_decomposition(d)
    # total area of subdomain 0 equals the offset
    area0 = d.mesh.areas[d.element_domain == 0].sum() + d.part_areas[:, 0].sum()
    assert area0 == pytest.approx(offset, rel=1e-10)


def test_ghost_faces_inside_subdomain_mesh():
    d = classify_and_cut(TriangleMesh.structured(12), [problems.circle()])
    for i, faces in enumerate(d.ghost_faces):
        in_ti = np.zeros(d.mesh.n_elements, bool)
        in_ti[d.elements_of(i)] = True
        assert len(faces) > 0
        assert np.all(in_ti[faces[:, 1]] & in_ti[faces[:, 2]])
        cut = np.zeros(d.mesh.n_elements, bool)
        cut[d.cut_elements] = True
        assert np.all(cut[faces[:, 1]] | cut[faces[:, 2]])


def test_write_decomposition(tmp_path):
    d = classify_and_cut(TriangleMesh.structured(3), [problems.circle()])
    path = tmp_path / "cut.txt"
    write_decomposition(path, d)
    lines = path.read_text().splitlines()
    assert lines[0] == "vertices 16"
    assert f"segments {d.n_cut}" in lines


def test_interface_validation():
    with pytest.raises(ValueError):
        LevelSetInterface("elliptic")
    with pytest.raises(ValueError):
        LevelSetInterface.circular((0.5, 0.5), -1.0)
