import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import penalty_spde as ps
from penalty_spde.errors import ConfigurationError
from penalty_spde.quadrature import quadrature_rule
from penalty_spde.spaces import l2_project, ref_basis, ref_grad


@pytest.mark.parametrize("degree", [1, 2])
def test_partition_of_unity(degree):
    rule = quadrature_rule(5)
    phi = ref_basis(degree, rule.points)
    np.testing.assert_allclose(phi.sum(axis=1), 1.0, atol=1e-14)
    gphi = ref_grad(degree, rule.points)
    np.testing.assert_allclose(gphi.sum(axis=1), 0.0, atol=1e-13)


@pytest.mark.parametrize("degree", [1, 2])
def test_nodal_property(degree):
    # basis i equals 1 at node i, 0 at the others
    nodes = np.array(
        [[0, 0], [1, 0], [0, 1]]
        if degree == 1
        else [[0, 0], [1, 0], [0, 1], [0.5, 0], [0.5, 0.5], [0, 0.5]],
        dtype=float,
    )
    phi = ref_basis(degree, nodes)
    np.testing.assert_allclose(phi, np.eye(len(nodes)), atol=1e-14)


def test_ref_grad_matches_finite_differences():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0.05, 0.4, size=(10, 2))
    eps = 1e-6
    for degree in (1, 2):
        g = ref_grad(degree, pts)
        for d in range(2):
            shift = np.zeros(2)
            shift[d] = eps
            fd = (ref_basis(degree, pts + shift) - ref_basis(degree, pts - shift)) / (
                2 * eps
            )
            np.testing.assert_allclose(g[:, :, d], fd, atol=1e-8)


def test_dof_counts_p2_vector(unit_square_4, vel_space_4):
    # (2n+1)^2 scalar P2 dofs on an n x n structured square, two components
    assert vel_space_4.n_scalar == 81
    assert vel_space_4.n_dofs == 162


def test_dof_counts_p1(pres_space_4):
    assert pres_space_4.n_scalar == 25
    assert pres_space_4.n_dofs == 25


def test_build_space_rejects_unsupported():
    mesh = ps.generate_rect_mesh(2, 2)
    with pytest.raises(ConfigurationError):
        ps.build_space(mesh, 3, 1)
    with pytest.raises(ConfigurationError):
        ps.build_space(mesh, 1, 3)


def test_geometry_det_equals_twice_area(unit_square_4, vel_space_4):
    det, _ = vel_space_4.geometry()
    np.testing.assert_allclose(det, 2.0 * unit_square_4.signed_areas(), atol=1e-14)


def test_physical_points_cover_triangles(vel_space_4):
    rule = quadrature_rule(2)
    pts = vel_space_4.physical_points(rule.points)
    assert pts.shape == (vel_space_4.mesh.n_triangles, len(rule.weights), 2)
    assert pts[..., 0].min() >= 0 and pts[..., 0].max() <= 1


@pytest.mark.parametrize("degree", [1, 2])
def test_l2_project_reproduces_polynomials(degree):
    mesh = ps.generate_rect_mesh(3, 3)
    space = ps.build_space(mesh, degree, 1)
    if degree == 1:
        target = lambda x, y: 2.0 + 3.0 * x - y
    else:
        target = lambda x, y: 1.0 + x * y - 2.0 * y**2
    f = l2_project(space, target)
    x, y = space.dof_coords[:, 0], space.dof_coords[:, 1]
    np.testing.assert_allclose(f.coefficients, target(x, y), atol=1e-12)


def test_l2_project_idempotent(vel_space_4):
    rng = np.random.default_rng(3)
    f = ps.FEFunction(vel_space_4, rng.standard_normal(vel_space_4.n_dofs))
    g = l2_project(vel_space_4, f)
    np.testing.assert_allclose(g.coefficients, f.coefficients, atol=1e-11)


def test_fefunction_rejects_wrong_length(vel_space_4):
    with pytest.raises(ConfigurationError):
        ps.FEFunction(vel_space_4, np.zeros(3))


def test_fefunction_dump_load_round_trip(tmp_path, vel_space_4):
    rng = np.random.default_rng(5)
    f = ps.FEFunction(vel_space_4, rng.standard_normal(vel_space_4.n_dofs))
    path = tmp_path / "field.txt"
    f.dump(path)
    g = ps.FEFunction.load(path, vel_space_4)
    np.testing.assert_array_equal(g.coefficients, f.coefficients)


def test_dirichlet_constraints_full_boundary(vel_space_4):
    cs = ps.dirichlet_constraints(vel_space_4, {"default": lambda x, y: (1.0, 2.0)})
    # boundary scalar dofs of P2 on n x n square: 2 * 4n vertices+midpoints
    assert len(cs.indices) == 2 * (4 * 4 + 4 * 4)
    assert set(cs.values) == {1.0, 2.0}


def test_dirichlet_constraints_single_tag(vel_space_4):
    cs = ps.dirichlet_constraints(vel_space_4, {1: lambda x, y: (y, 0.0)})
    coords = vel_space_4.dof_coords
    for idx in cs.indices:
        scalar = idx % vel_space_4.n_scalar
        assert abs(coords[scalar, 0]) < 1e-14


def test_dirichlet_constraints_unknown_tag(vel_space_4):
    with pytest.raises(ConfigurationError):
        ps.dirichlet_constraints(vel_space_4, {9: lambda x, y: (0.0, 0.0)})


def test_dirichlet_larger_tag_wins():
    mesh = ps.generate_rect_mesh(2, 2)
    space = ps.build_space(mesh, 1, 1)
    cs = ps.dirichlet_constraints(
        space, {1: lambda x, y: 10.0, 3: lambda x, y: 30.0}
    )
    vals = dict(zip(cs.indices, cs.values))
    corner = int(np.argmin(np.abs(space.dof_coords).sum(axis=1)))
    assert vals[corner] == 30.0


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=1, max_value=6))
def test_p2_scalar_dof_count_formula(n):
    mesh = ps.generate_rect_mesh(n, n)
    space = ps.build_space(mesh, 2, 1)
    assert space.n_scalar == (2 * n + 1) ** 2
