import numpy as np
import pytest

from opencavity.mesh import (CAVITY, CAVITY_EXTENDED, GAMMA_D, GAMMA_I, GAMMA_N, GAMMA_O, GAMMA_W, RectUnion,
                             build_structured_mesh, cavity_mesh, cavity_rules, extended_cavity_mesh,
                             extract_submesh, tag_boundaries)


def unit_square(n):
    return build_structured_mesh(CAVITY, n)


def test_smallest_square_counts():
    m = unit_square(1)
    assert (m.n_vertices, m.n_triangles, m.n_edges) == (4, 2, 5)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_square_counts_follow_lattice_formula(n):
    m = unit_square(n)
    assert m.n_vertices == (n + 1) ** 2
    assert m.n_triangles == 2 * n * n
    assert m.n_vertices - m.n_edges + m.n_triangles == 1


@pytest.mark.parametrize("n", [2, 3])
def test_square_counts_by_enumeration(n):
    # Brute force: every lattice point, and every cell split into two triangles.
    pts = {(i, j) for i in range(n + 1) for j in range(n + 1)}
    tris = [(i, j, k) for i in range(n) for j in range(n) for k in range(2)]
    m = unit_square(n)
    assert m.n_vertices == len(pts)
    assert m.n_triangles == len(tris)


@pytest.mark.parametrize("domain,area", [(CAVITY, 1.0), (CAVITY_EXTENDED, 4.0)])
@pytest.mark.parametrize("n", [1, 2, 5])
def test_total_area(domain, area, n):
    m = build_structured_mesh(domain, n)
    a = m.signed_areas()
    assert np.all(a > 0)
    assert abs(a.sum() - area) < 1e-12


def test_edge_sharing_and_conformity():
    m = build_structured_mesh(CAVITY_EXTENDED, 3)
    counts = np.bincount(m.triangle_edges.ravel(), minlength=m.n_edges)
    boundary = np.zeros(m.n_edges, dtype=bool)
    boundary[m.boundary_edges] = True
    assert np.all(counts[boundary] == 1)
    assert np.all(counts[~boundary] == 2)
    # each midpoint node sits at the midpoint of its edge
    xy = m.p2_coordinates
    mid = 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])
    assert np.allclose(xy[m.n_vertices:], mid, atol=1e-15)


def test_fixed_diagonal_direction():
    m = unit_square(1)
    # the diagonal joins (0,0) and (1,1)
    ends = {tuple(sorted(map(tuple, m.vertices[e]))) for e in m.edges}
    assert ((0.0, 0.0), (1.0, 1.0)) in ends
    assert ((0.0, 1.0), (1.0, 0.0)) not in ends


def test_off_lattice_corner_rejected():
    with pytest.raises(ValueError, match="0.25"):
        build_structured_mesh(RectUnion([(0, 1, 0, 0.25)]), 2)


def test_invalid_n_rejected():
    with pytest.raises(ValueError):
        build_structured_mesh(CAVITY, 0)


def test_overlapping_rects_rejected():
    with pytest.raises(ValueError):
        RectUnion([(0, 1, 0, 1), (0.5, 2, 0, 1)])


def test_cavity_tags_n2():
    m = cavity_mesh(2)
    mids = m.edge_midpoints(m.tags[GAMMA_D])
    assert len(mids) == 2 and np.allclose(mids[:, 0], 0.0)
    assert GAMMA_I not in m.tags


@pytest.mark.parametrize("n", [1, 2, 5, 7])
def test_open_edge_count(n):
    assert len(cavity_mesh(n).tags[GAMMA_O]) == n


def test_extended_tags_n2():
    m = extended_cavity_mesh(2)
    mids = m.edge_midpoints(m.tags[GAMMA_O])
    assert len(mids) == 6 and np.allclose(mids[:, 0], 2.0)
    d = m.edge_midpoints(m.tags[GAMMA_D])
    assert np.allclose(d[:, 0], 0.0) and np.all((d[:, 1] > 0) & (d[:, 1] < 1))


@pytest.mark.parametrize("maker", [cavity_mesh, extended_cavity_mesh])
def test_every_boundary_edge_tagged_in_both_decompositions(maker):
    m = maker(3)
    vel = np.concatenate([m.tags.get(t, np.empty(0, int)) for t in (GAMMA_I, GAMMA_W, GAMMA_O)])
    tem = np.concatenate([m.tags.get(t, np.empty(0, int)) for t in (GAMMA_D, GAMMA_N, GAMMA_O)])
    assert sorted(vel) == sorted(m.boundary_edges)
    assert sorted(tem) == sorted(m.boundary_edges)


def test_untagged_edge_reports_midpoint():
    rules = [r for r in cavity_rules() if r[1] != GAMMA_N]
    with pytest.raises(ValueError, match=r"\(0\.5, 0\)"):
        tag_boundaries(unit_square(1), rules)


def test_open_normals_point_outward():
    m = cavity_mesh(3)
    _, normal, length = m.oriented_edges(GAMMA_O)
    assert np.allclose(normal, [1.0, 0.0])
    assert abs(length.sum() - 1.0) < 1e-14


def test_submesh_matches_direct_build():
    ext = extended_cavity_mesh(2)
    sub, node_map = extract_submesh(ext, CAVITY)
    direct = cavity_mesh(2)
    assert np.array_equal(sub.vertices, direct.vertices)
    assert np.array_equal(sub.triangles, direct.triangles)
    assert np.array_equal(sub.p2_cells, direct.p2_cells)
    assert node_map.vertex_pairs.shape[0] == 9
    err = np.abs(ext.p2_coordinates[node_map.pairs] - direct.p2_coordinates).max()
    assert err == 0.0
    assert len(np.unique(node_map.pairs)) == len(node_map.pairs)


def test_submesh_of_itself_is_identity():
    ext = extended_cavity_mesh(2)
    _, node_map = extract_submesh(ext, CAVITY_EXTENDED)
    assert np.array_equal(node_map.pairs, np.arange(ext.n_p2_nodes))


def test_submesh_outside_rejected():
    with pytest.raises(ValueError):
        extract_submesh(extended_cavity_mesh(2), RectUnion([(3, 4, 0, 1)]))


def test_mesh_is_immutable():
    m = cavity_mesh(2)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5.0
