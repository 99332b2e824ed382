import numpy as np
import pytest

import penalty_spde as ps
from penalty_spde.errors import ConfigurationError
from penalty_spde.spaces import l2_project

# 2 * sum_{i,j=1..5} 1/(i+j)^2, grouped by s = i+j with multiplicity min(s-1, 11-s):
# 2 * (1/4 + 2/9 + 3/16 + 4/25 + 5/36 + 4/49 + 3/64 + 2/81 + 1/100)
TRACE_J5 = 2.243620244394054


def test_lambda_table_and_trace():
    model = ps.make_noise_model(5)
    assert model.lambdas.shape == (5, 5)
    assert abs(model.lambdas[0, 0] - 1.0 / 4.0) < 1e-15
    assert abs(model.lambdas[2, 3] - 1.0 / 49.0) < 1e-15
    assert abs(model.trace - TRACE_J5) < 1e-12


def test_make_noise_model_validation():
    with pytest.raises(ConfigurationError):
        ps.make_noise_model(0)
    with pytest.raises(ConfigurationError):
        ps.make_noise_model(3, lambda_kind="bogus")
    with pytest.raises(ConfigurationError):
        ps.make_noise_model(3, lambda_kind="custom")
    with pytest.raises(ConfigurationError):
        ps.make_noise_model(2, lambda_kind="custom", lambda_table=[[1.0, -1.0], [1.0, 1.0]])


def test_gamma_kinds():
    add = ps.make_noise_model(2, gamma_kind="additive", amplitude=3.0)
    lin = ps.make_noise_model(2, gamma_kind="linear", amplitude=3.0)
    v = np.array([1.0, -2.0])
    np.testing.assert_allclose(add.gamma(v), [3.0, 3.0])
    np.testing.assert_allclose(lin.gamma(v), [3.0, -6.0])
    assert add.lipschitz_constant == 0.0
    assert lin.lipschitz_constant == 3.0


def test_stream_is_deterministic_and_keyed():
    a = ps.stream(7, 3, 11).standard_normal(4)
    b = ps.stream(7, 3, 11).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    c = ps.stream(7, 3, 12).standard_normal(4)
    d = ps.stream(7, 4, 11).standard_normal(4)
    e = ps.stream(8, 3, 11).standard_normal(4)
    for other in (c, d, e):
        assert not np.array_equal(a, other)


def test_sample_increment_shapes_and_scaling():
    model = ps.make_noise_model(5)
    rng = ps.stream(0, 0, 1)
    incr = ps.sample_increment(model, rng, 0.25)
    assert incr.xi.shape == (2, 5, 5)
    coef = incr.scaled_coefficients()
    np.testing.assert_allclose(
        coef, np.sqrt(0.25 * model.lambdas)[None] * incr.xi, atol=1e-15
    )
    with pytest.raises(ConfigurationError):
        ps.sample_increment(model, rng, -1.0)


def test_increment_evaluate_matches_naive_sum():
    model = ps.make_noise_model(3, domain_scale=2.0)
    incr = ps.sample_increment(model, ps.stream(1, 0, 1), 0.1)
    x = np.array([0.3, 1.1])
    y = np.array([0.7, 0.2])
    fast = incr.evaluate(x, y)
    coef = incr.scaled_coefficients()
    slow = np.zeros((2, 2))
    for c in range(2):
        for i in range(1, 4):
            for j in range(1, 4):
                slow[:, c] += coef[c, i - 1, j - 1] * model.eigenfunction(i, j, x, y)
    np.testing.assert_allclose(fast, slow, atol=1e-13)


def test_increment_moments():
    model = ps.make_noise_model(3)
    k = 0.04
    n = 4000
    coefs = np.array(
        [
            ps.sample_increment(model, ps.stream(99, s, 1), k).scaled_coefficients()
            for s in range(n)
        ]
    )
    var = coefs.var(axis=0)
    expected = k * model.lambdas
    assert np.abs(coefs.mean(axis=0)).max() < 5 * np.sqrt(expected).max() / np.sqrt(n)
    np.testing.assert_allclose(var, np.broadcast_to(expected, var.shape), rtol=0.2)


def test_noise_load_vector_consistent_with_projection(vel_space_4):
    model = ps.make_noise_model(4, domain_scale=1.0, amplitude=1.7)
    incr = ps.sample_increment(model, ps.stream(5, 0, 1), 0.01)
    prev = ps.FEFunction(vel_space_4, np.zeros(vel_space_4.n_dofs))
    b = ps.noise_load_vector(model, incr, prev, vel_space_4)

    def field(x, y):
        vals = incr.evaluate(x, y)
        return 1.7 * vals[..., 0], 1.7 * vals[..., 1]

    proj = l2_project(vel_space_4, field)
    M = ps.mass_matrix(vel_space_4)
    np.testing.assert_allclose(M @ proj.coefficients, b, atol=1e-12)


def test_noise_load_vector_linear_gamma(vel_space_4):
    model = ps.make_noise_model(3, domain_scale=1.0, gamma_kind="linear", amplitude=2.0)
    incr = ps.sample_increment(model, ps.stream(6, 0, 1), 0.01)
    zero = ps.FEFunction(vel_space_4, np.zeros(vel_space_4.n_dofs))
    b = ps.noise_load_vector(model, incr, zero, vel_space_4)
    # gamma(0) = 0 for multiplicative noise
    assert np.abs(b).max() < 1e-15
