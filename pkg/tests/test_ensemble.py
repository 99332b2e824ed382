import numpy as np
import pytest
from dataclasses import replace

import penalty_spde as ps
from penalty_spde.errors import ConfigurationError


def make_pair(eps=0.05, k=0.05, T=0.2, kind="penalty-linear"):
    nm = ps.make_noise_model(5, domain_scale=1.0)
    bc = {"default": lambda x, y: (0.0, 0.0)}
    cfg_eps = ps.SchemeConfig(
        nu=1.0, eps=eps, k=k, T=T, scheme_kind=kind,
        noise_model=nm, boundary_values=bc,
    )
    ref_kind = "saddle" if kind != "stokes-penalty" else "stokes-saddle"
    cfg_ref = replace(cfg_eps, scheme_kind=ref_kind, eps=1.0)
    return cfg_ref, cfg_eps


def test_run_ensemble_basic(unit_square_4):
    cfg_ref, cfg_eps = make_pair()
    stats = ps.run_ensemble(unit_square_4, cfg_ref, cfg_eps, 6, 11)
    assert stats.n_samples == 6
    assert stats.n_failed == 0
    assert stats.terminal_errors.shape == (6,)
    assert stats.mean_sq_error > 0
    assert stats.max_step_mean_sq >= stats.mean_sq_error
    assert abs(stats.rms_error - np.sqrt(stats.mean_sq_error)) < 1e-15


def test_run_ensemble_rejects_mismatched_configs(unit_square_4):
    cfg_ref, cfg_eps = make_pair()
    bad = replace(cfg_ref, k=0.01)
    with pytest.raises(ConfigurationError):
        ps.run_ensemble(unit_square_4, bad, cfg_eps, 2, 0)
    bad_noise = replace(
        cfg_ref, noise_model=ps.make_noise_model(5, domain_scale=1.0)
    )
    with pytest.raises(ConfigurationError):
        ps.run_ensemble(unit_square_4, bad_noise, cfg_eps, 2, 0)


def test_run_ensemble_thread_invariance(unit_square_4):
    cfg_ref, cfg_eps = make_pair()
    a = ps.run_ensemble(unit_square_4, cfg_ref, cfg_eps, 5, 3, threads=1)
    b = ps.run_ensemble(unit_square_4, cfg_ref, cfg_eps, 5, 3, threads=3)
    np.testing.assert_array_equal(a.terminal_errors, b.terminal_errors)
    assert a.mean_sq_error == b.mean_sq_error


def test_run_ensemble_ref_cache_reused(unit_square_4):
    cfg_ref, cfg_eps = make_pair()
    cache = {}
    a = ps.run_ensemble(unit_square_4, cfg_ref, cfg_eps, 3, 9, ref_cache=cache)
    assert set(cache) == {0, 1, 2}
    b = ps.run_ensemble(unit_square_4, cfg_ref, cfg_eps, 3, 9, ref_cache=cache)
    np.testing.assert_array_equal(a.terminal_errors, b.terminal_errors)


def test_epsilon_sweep_fixed_k_decreasing(unit_square_4):
    _, cfg = make_pair(eps=0.1, k=0.02)
    res = ps.epsilon_sweep(unit_square_4, cfg, [0.1, 0.01, 0.001], 6, 5)
    mse = [s.mean_sq_error for s in res.stats]
    assert mse[0] > mse[1] > mse[2]
    assert res.mode == "fixed-k"
    assert len(res.c_tilde) == 3
    assert all(k == cfg.k for k in res.k_values)


def test_epsilon_sweep_recipe_mode_k(unit_square_4):
    _, cfg = make_pair(eps=0.2, k=0.05)
    res = ps.epsilon_sweep(
        unit_square_4, cfg, [0.2, 0.1], 2, 5, k_mode="recipe"
    )
    assert res.mode == "recipe"
    for k, eps in zip(res.k_values, res.eps_values):
        # snapped to divide T, starting from eps^{1.1}
        assert abs(k - cfg.T / round(cfg.T / eps**1.1)) < 1e-14


def test_epsilon_sweep_requires_decreasing_list(unit_square_4):
    _, cfg = make_pair()
    with pytest.raises(ConfigurationError):
        ps.epsilon_sweep(unit_square_4, cfg, [0.01, 0.05], 2, 0)


def test_epsilon_sweep_rejects_reference_kind(unit_square_4):
    cfg_ref, _ = make_pair()
    with pytest.raises(ConfigurationError):
        ps.epsilon_sweep(unit_square_4, cfg_ref, [0.1, 0.01], 2, 0)


def test_stability_audit_structure():
    _, cfg = make_pair(T=0.2)
    meshes = [ps.generate_rect_mesh(n, n) for n in (2, 4)]
    report = ps.stability_audit(meshes, cfg, 3, 1)
    assert len(report["levels"]) == 2
    for lv in report["levels"]:
        assert lv["bracket"] > 0
        assert abs(lv["eps"] - lv["h"] ** 2.1) < 1e-14
    assert isinstance(report["blow_up_flagged"], bool)


def test_stability_audit_h_override():
    _, cfg = make_pair(T=0.2)
    meshes = [ps.generate_rect_mesh(2, 2)]
    report = ps.stability_audit(meshes, cfg, 2, 1, h_values=[0.5])
    assert abs(report["levels"][0]["h"] - 0.5) < 1e-15
    with pytest.raises(ConfigurationError):
        ps.stability_audit(meshes, cfg, 2, 1, h_values=[0.5, 0.25])
