import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wc2p.errors import ConfigError, MeshError
from wc2p.mesh import (PERIODIC, SLIP_WALL, build_cartesian, build_triangulated, import_mesh,
                       render_mesh, validate_mesh)

TWO_TRIANGLES = """wc2p-mesh v1
# unit square
vertices 4
0 0
1 0
1 1
0 1
cells 2
3 0 1 2
3 0 2 3
boundary 1
tag slip_wall:walls 4
0 1
1 2
2 3
3 0
"""


def test_cartesian_16():
    m = build_cartesian(16, 16, (8.0, 8.0))
    assert m.n_cells == 256
    assert m.n_faces == 544
    np.testing.assert_allclose(m.areas, 0.25, rtol=1e-15)
    assert m.h == pytest.approx(0.5, rel=1e-15)


def test_single_cell():
    m = build_cartesian(1, 1, (1.0, 1.0))
    assert m.n_cells == 1 and m.n_faces == 4
    assert np.all(m.face_right < 0)
    assert m.closure_residual.max() <= 1e-15


def test_sloshing_mesh():
    m = build_cartesian(32, 72, (1.0, 2.25))
    assert m.n_cells == 2304
    np.testing.assert_allclose(m.areas, (1 / 32) ** 2, rtol=1e-12)
    assert validate_mesh(m).max_closure_residual <= 1e-12


@given(st.integers(1, 12), st.integers(1, 12), st.floats(0.1, 10), st.floats(0.1, 10))
@settings(max_examples=30)
def test_cartesian_invariants(nx, ny, lx, ly):
    m = build_cartesian(nx, ny, (lx, ly))
    assert m.n_faces == nx * (ny + 1) + ny * (nx + 1)
    assert np.all(m.areas > 0) and np.all(m.face_length > 0)
    np.testing.assert_allclose(np.hypot(*m.face_normal.T), 1.0, atol=1e-12)
    assert m.closure_residual.max() <= 1e-12
    assert m.h == pytest.approx(np.sqrt(lx * ly / (nx * ny)), rel=1e-12)


def test_normals_point_out_of_left_cell():
    m = build_triangulated((1.0, 1.0), size=0.2)
    d = m.face_mid - m.centroids[m.face_left]
    assert np.all(np.einsum("ij,ij->i", d, m.face_normal) > 0)


def test_neighbor_counts_interior_cell():
    m = build_cartesian(5, 5)
    c = 2 * 5 + 2
    assert len(m.moore[c]) == 8
    assert len(m.von_neumann[c]) == 4


def test_periodic_pairs():
    m = build_cartesian(4, 3, (2.0, 1.0), boundary_spec={"left": PERIODIC, "right": PERIODIC})
    per = np.flatnonzero(m.face_partner >= 0)
    assert len(per) == 6
    for f in per:
        p = m.face_partner[f]
        assert m.face_partner[p] == f
        assert m.face_length[f] == pytest.approx(m.face_length[p], abs=1e-12)
        np.testing.assert_allclose(m.face_normal[f], -m.face_normal[p], atol=1e-12)
    # periodic neighbours wrap around
    assert 3 in m.von_neumann[0].tolist()
    assert validate_mesh(m).passed


def test_periodic_mismatch():
    with pytest.raises(ConfigError):
        build_cartesian(4, 4, boundary_spec={"left": PERIODIC, "right": SLIP_WALL})


def test_import_two_triangles():
    m = import_mesh(TWO_TRIANGLES)
    assert m.n_cells == 2 and m.n_faces == 5
    assert int(np.sum(m.face_right >= 0)) == 1
    assert validate_mesh(m).passed


def test_import_fixes_orientation():
    text = TWO_TRIANGLES.replace("3 0 1 2", "3 0 2 1")
    m = import_mesh(text)
    assert np.all(m.areas > 0)
    np.testing.assert_allclose(m.areas, 0.5)


@pytest.mark.parametrize("edit,line", [
    (("3 0 1 2", "3 0 1 9"), 9),          # dangling vertex id
    (("3 0 2 3", "3 2 1 0"), 10),         # duplicate element
])
def test_import_errors_carry_line(edit, line):
    with pytest.raises(MeshError) as exc:
        import_mesh(TWO_TRIANGLES.replace(*edit))
    assert exc.value.line == line


def test_import_non_manifold():
    text = TWO_TRIANGLES.replace("cells 2\n3 0 1 2\n3 0 2 3", "cells 3\n3 0 1 2\n3 0 2 3\n3 0 2 1")
    with pytest.raises(MeshError):
        import_mesh(text.replace("3 0 2 1", "4 0 2 1 3"))


def test_import_bad_header():
    with pytest.raises(MeshError):
        import_mesh("not-a-mesh\n")


def test_render_round_trip():
    m = build_triangulated((2.0, 1.0), size=0.25)
    m2 = import_mesh(render_mesh(m))
    np.testing.assert_array_equal(m2.vertices, m.vertices)
    np.testing.assert_array_equal(m2.areas, m.areas)
    np.testing.assert_array_equal(m2.face_kind, m.face_kind)


def test_drop_triangle_mesh():
    """About 1054 triangles on the 8 m drop box, all invariants hold."""
    m = build_triangulated((8.0, 8.0), size=0.374)
    assert abs(m.n_cells - 1054) <= 0.05 * 1054
    rep = validate_mesh(m)
    assert rep.passed, str(rep)
    assert rep.max_closure_residual <= 1e-12 * 8


def test_zero_area_cell_fails():
    text = """wc2p-mesh v1
vertices 5
0 0
1 0
1 1
0 1
2 0
cells 2
3 0 1 2
3 0 1 4
boundary 1
tag slip_wall 4
1 2
2 0
1 4
4 0
"""
    m = import_mesh(text)
    rep = validate_mesh(m)
    assert not rep.passed
    assert rep.degenerate_cells == [1]


def test_von_neumann_inside_moore_brute_force():
    m = build_triangulated((1.0, 2.0), size=0.15)
    verts = [set(v) for v in m.cell_vertices]
    for i in range(m.n_cells):
        edge_nb = {j for j in range(m.n_cells) if j != i and len(verts[i] & verts[j]) == 2}
        vert_nb = {j for j in range(m.n_cells) if j != i and verts[i] & verts[j]}
        assert set(m.von_neumann[i].tolist()) == edge_nb
        assert set(m.moore[i].tolist()) == vert_nb
        assert edge_nb <= vert_nb
