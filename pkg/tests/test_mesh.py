import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import penalty_spde as ps
from penalty_spde.errors import (
    ConfigurationError,
    InvalidGeometryError,
    MeshParseError,
)
from penalty_spde.mesh import (
    TAG_BOTTOM,
    TAG_INFLOW,
    TAG_LEFT,
    TAG_REENTRANT_H,
    TAG_REENTRANT_V,
    TAG_RIGHT,
    TAG_TOP,
)


def test_rect_mesh_counts():
    mesh = ps.generate_rect_mesh(4, 3)
    assert mesh.n_vertices == 5 * 4
    assert mesh.n_triangles == 2 * 4 * 3
    assert len(mesh.boundary_edges) == 2 * (4 + 3)


def test_rect_mesh_area_and_orientation():
    mesh = ps.generate_rect_mesh(5, 7, bounds=(1.0, -2.0, 4.0, 0.0))
    areas = mesh.signed_areas()
    assert np.all(areas > 0)
    assert abs(areas.sum() - 3.0 * 2.0) < 1e-12


def test_rect_mesh_boundary_tags():
    mesh = ps.generate_rect_mesh(3, 3)
    tags = {}
    for v0, v1, tag in mesh.boundary_edges:
        mid = 0.5 * (mesh.vertices[v0] + mesh.vertices[v1])
        tags.setdefault(int(tag), []).append(mid)
    assert all(abs(m[0]) < 1e-14 for m in tags[TAG_LEFT])
    assert all(abs(m[0] - 1) < 1e-14 for m in tags[TAG_RIGHT])
    assert all(abs(m[1]) < 1e-14 for m in tags[TAG_BOTTOM])
    assert all(abs(m[1] - 1) < 1e-14 for m in tags[TAG_TOP])


def test_rect_mesh_rejects_bad_inputs():
    with pytest.raises(ConfigurationError):
        ps.generate_rect_mesh(0, 4)
    with pytest.raises(InvalidGeometryError):
        ps.generate_rect_mesh(2, 2, bounds=(0, 0, 0, 1))


def test_l_shape_area():
    side = 5.0
    mesh = ps.generate_l_shape(side, 10)
    assert abs(mesh.signed_areas().sum() - 0.75 * side**2) < 1e-10


def test_l_shape_requires_even_n():
    with pytest.raises(ConfigurationError):
        ps.generate_l_shape(5.0, 7)
    with pytest.raises(InvalidGeometryError):
        ps.generate_l_shape(-1.0, 4)


def test_l_shape_reentrant_and_inflow_tags():
    mesh = ps.generate_l_shape(5.0, 10)
    tags = set(int(t) for t in mesh.boundary_edges[:, 2])
    assert TAG_REENTRANT_V in tags and TAG_REENTRANT_H in tags
    assert TAG_INFLOW in tags
    for v0, v1, tag in mesh.boundary_edges:
        if int(tag) == TAG_INFLOW:
            p0, p1 = mesh.vertices[v0], mesh.vertices[v1]
            assert abs(p0[0]) < 1e-14 and abs(p1[0]) < 1e-14
            assert max(p0[1], p1[1]) <= 1.0 + 1e-12


def test_l_shape_small_side_has_no_inflow():
    mesh = ps.generate_l_shape(0.5, 4)
    tags = set(int(t) for t in mesh.boundary_edges[:, 2])
    assert TAG_INFLOW not in tags


def test_mesh_stats_structured():
    mesh = ps.generate_rect_mesh(4, 4)
    stats = ps.mesh_stats(mesh)
    assert abs(stats["h_max"] - np.sqrt(2) / 4) < 1e-14
    assert abs(stats["quasi_uniformity_ratio"] - 1.0) < 1e-14


def test_validate_detects_missing_boundary_tag():
    mesh = ps.generate_rect_mesh(2, 2)
    broken = ps.Mesh(mesh.vertices, mesh.triangles, mesh.boundary_edges[:-1])
    with pytest.raises(InvalidGeometryError):
        broken.validate()


def test_save_load_round_trip(tmp_path):
    mesh = ps.generate_l_shape(2.0, 4)
    path = tmp_path / "mesh.txt"
    ps.save_mesh(mesh, path)
    back = ps.load_mesh(path)
    np.testing.assert_array_equal(back.vertices, mesh.vertices)
    np.testing.assert_array_equal(back.triangles, mesh.triangles)
    np.testing.assert_array_equal(back.boundary_edges, mesh.boundary_edges)


MSH_SAMPLE = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
$EndNodes
$Elements
7
1 15 2 0 1 1
2 1 2 1 1 1 2
3 1 2 2 2 2 3
4 1 2 4 3 3 4
5 1 2 1 4 4 1
6 2 2 0 5 1 2 3
7 2 2 0 5 1 3 4
$EndElements
"""


def test_load_msh_sample(tmp_path):
    path = tmp_path / "square.msh"
    path.write_text(MSH_SAMPLE)
    mesh = ps.load_msh(path)
    assert mesh.n_vertices == 4
    assert mesh.n_triangles == 2
    assert abs(mesh.signed_areas().sum() - 1.0) < 1e-14
    tags = sorted(int(t) for t in mesh.boundary_edges[:, 2])
    assert tags == [1, 1, 2, 4]


def test_load_msh_flips_clockwise_triangles(tmp_path):
    text = MSH_SAMPLE.replace("6 2 2 0 5 1 2 3", "6 2 2 0 5 1 3 2").replace(
        "7 2 2 0 5 1 3 4", "7 2 2 0 5 1 4 3"
    )
    path = tmp_path / "cw.msh"
    path.write_text(text)
    mesh = ps.load_msh(path)
    assert np.all(mesh.signed_areas() > 0)


def test_load_msh_rejects_unsupported_element(tmp_path):
    text = MSH_SAMPLE.replace("6 2 2 0 5 1 2 3", "6 4 2 0 5 1 2 3")
    path = tmp_path / "bad.msh"
    path.write_text(text)
    with pytest.raises(MeshParseError, match="unsupported element type 4"):
        ps.load_msh(path)


def test_load_msh_rejects_3d_nodes(tmp_path):
    text = MSH_SAMPLE.replace("3 1 1 0", "3 1 1 0.5")
    path = tmp_path / "bad3d.msh"
    path.write_text(text)
    with pytest.raises(InvalidGeometryError):
        ps.load_msh(path)


def test_load_msh_rejects_wrong_version(tmp_path):
    text = MSH_SAMPLE.replace("2.2 0 8", "4.1 0 8")
    path = tmp_path / "v4.msh"
    path.write_text(text)
    with pytest.raises(MeshParseError):
        ps.load_msh(path)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=9), st.integers(min_value=1, max_value=9))
def test_rect_mesh_euler_characteristic(nx, ny):
    mesh = ps.generate_rect_mesh(nx, ny)
    n_edges = len(mesh.edge_map())
    # planar disk: V - E + F = 1 (counting only triangle faces)
    assert mesh.n_vertices - n_edges + mesh.n_triangles == 1
    assert abs(mesh.signed_areas().sum() - 1.0) < 1e-12
