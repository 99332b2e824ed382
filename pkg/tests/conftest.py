import numpy as np
import pytest

import penalty_spde as ps


@pytest.fixture(scope="session")
def unit_square_4():
    return ps.generate_rect_mesh(4, 4)


@pytest.fixture(scope="session")
def unit_square_8():
    return ps.generate_rect_mesh(8, 8)


@pytest.fixture(scope="session")
def small_l_shape():
    return ps.generate_l_shape(2.0, 4)


@pytest.fixture(scope="session")
def vel_space_4(unit_square_4):
    return ps.build_space(unit_square_4, 2, 2)


@pytest.fixture(scope="session")
def pres_space_4(unit_square_4):
    return ps.build_space(unit_square_4, 1, 1)


@pytest.fixture
def zero_bc():
    return {"default": lambda x, y: (0.0, 0.0)}


def random_zero_trace_field(space, rng, amplitude=1.0):
    """Random coefficients with zero values on all Dirichlet boundary dofs."""
    constraints = ps.dirichlet_constraints(space, {"default": lambda x, y: (0.0, 0.0)})
    coeffs = amplitude * rng.standard_normal(space.n_dofs)
    coeffs[constraints.indices] = 0.0
    return ps.FEFunction(space, coeffs)
