"""Monte-Carlo ensembles, paired-path scheme comparison, epsilon sweeps.

Scheme pairs always consume common random numbers: for sample s both
schemes replay the stream keyed by (base_seed, s), so the per-sample
difference isolates the penalty error and the Monte-Carlo variance of the
comparison collapses. Replay hashes of the consumed noise are asserted
equal for every pair.
"""

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, StepError
from .mesh import Mesh, mesh_stats
from .schemes import SchemeConfig, Stepper, run_path

_REFERENCE_OF = {
    "penalty-linear": "saddle",
    "penalty-nonlinear": "saddle",
    "stokes-penalty": "stokes-saddle",
}


@dataclass
class EnsembleStats:
    n_samples: int
    n_failed: int
    terminal_errors: np.ndarray  # e_s = |V_ref^M - V_eps^M|_L2 per sample
    mean_sq_error: float
    rms_error: float
    error_variance: float  # sample variance of e_s
    max_step_mean_sq: float  # max over m of mean_s e_{s,m}^2
    ci_halfwidth: float  # 95% normal-approx CI for the mean-square error


@dataclass
class SweepResult:
    eps_values: list
    k_values: list
    stats: list  # EnsembleStats per eps
    slope: float  # log-log slope of mean_sq_error vs eps (nan if < 2 points)
    c_tilde: list  # mean_sq_error * h / sqrt(eps) per eps
    h: float
    mode: str  # "fixed-k" or "recipe"


def _check_pairable(config_ref: SchemeConfig, config_eps: SchemeConfig):
    if abs(config_ref.k - config_eps.k) > 1e-15 * config_ref.k:
        raise ConfigurationError("paired configs must share the time step k")
    if abs(config_ref.T - config_eps.T) > 1e-15:
        raise ConfigurationError("paired configs must share the final time T")
    if config_ref.nu != config_eps.nu:
        raise ConfigurationError("paired configs must share the viscosity")
    if config_ref.noise_model is not config_eps.noise_model:
        raise ConfigurationError("paired configs must share the noise model")


def _summarize(terminal, step_mean_sq, n_failed, n_samples):
    e = np.asarray(terminal)
    e_sq = e**2
    mse = float(e_sq.mean())
    var = float(e.var(ddof=1)) if len(e) > 1 else 0.0
    ci = (
        1.96 * float(e_sq.std(ddof=1)) / np.sqrt(len(e_sq)) if len(e_sq) > 1 else 0.0
    )
    return EnsembleStats(
        n_samples=n_samples,
        n_failed=n_failed,
        terminal_errors=e,
        mean_sq_error=mse,
        rms_error=float(np.sqrt(mse)),
        error_variance=var,
        max_step_mean_sq=float(np.max(step_mean_sq)),
        ci_halfwidth=ci,
    )


def run_ensemble(mesh: Mesh, config_ref: SchemeConfig, config_eps: SchemeConfig,
                 n_samples: int, base_seed: int, threads: int = 1,
                 ref_cache: dict = None) -> EnsembleStats:
    """Paired-path Monte-Carlo comparison of two schemes on one mesh.

    `ref_cache` (optional, sample_index -> recorded reference velocities)
    lets an epsilon sweep reuse reference paths when k is unchanged.
    """
    _check_pairable(config_ref, config_eps)
    n_steps = config_eps.n_steps

    local = threading.local()

    def get_steppers():
        if not hasattr(local, "steppers"):
            local.steppers = (Stepper(mesh, config_ref), Stepper(mesh, config_eps))
        return local.steppers

    def one_sample(s):
        stepper_ref, stepper_eps = get_steppers()
        try:
            if ref_cache is not None and s in ref_cache:
                ref_vels, ref_hash = ref_cache[s]
            else:
                traj_ref = run_path(
                    config_ref, base_seed, s, stepper=stepper_ref, record_states=True
                )
                ref_vels = [st.V.coefficients for st in traj_ref.states[1:]]
                ref_hash = traj_ref.replay_hash
                if ref_cache is not None:
                    ref_cache[s] = (ref_vels, ref_hash)

            step_err_sq = np.empty(n_steps)

            def on_step(state):
                d = state.V.coefficients - ref_vels[state.m - 1]
                step_err_sq[state.m - 1] = float(d @ (stepper_eps.M @ d))

            traj_eps = run_path(
                config_eps, base_seed, s, stepper=stepper_eps, on_step=on_step
            )
            if traj_eps.replay_hash != ref_hash:
                raise ConfigurationError(
                    "paired paths consumed different noise streams"
                )
            return np.sqrt(step_err_sq[-1]), step_err_sq
        except StepError as exc:
            return exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_sample, range(n_samples)))
    else:
        results = [one_sample(s) for s in range(n_samples)]

    terminal = []
    per_step = []
    failures = []
    for s, res in enumerate(results):
        if isinstance(res, StepError):
            failures.append((s, str(res)))
        else:
            terminal.append(res[0])
            per_step.append(res[1])
    if len(failures) > 0.01 * n_samples:
        raise StepError(
            f"{len(failures)} of {n_samples} samples failed: {failures[:3]}"
        )
    step_mean_sq = np.mean(per_step, axis=0)
    return _summarize(terminal, step_mean_sq, len(failures), n_samples)


def epsilon_sweep(mesh: Mesh, config_template: SchemeConfig, eps_list,
                  n_samples: int, base_seed: int, k_mode: str = "fixed",
                  delta: float = 0.1, threads: int = 1) -> SweepResult:
    """Run the paired comparison across a strictly decreasing epsilon list.

    k_mode "fixed" keeps the template's k for every epsilon (reference
    paths are then shared); "recipe" derives k = eps^(1+delta) per epsilon.
    """
    eps_list = list(eps_list)
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigurationError("eps list must be strictly decreasing")
    if config_template.scheme_kind not in _REFERENCE_OF:
        raise ConfigurationError(
            f"no saddle reference for scheme kind {config_template.scheme_kind!r}"
        )
    ref_kind = _REFERENCE_OF[config_template.scheme_kind]

    h = mesh_stats(mesh)["h_max"]
    stats = []
    k_values = []
    ref_cache = {} if k_mode == "fixed" else None
    for eps in eps_list:
        k = config_template.k if k_mode == "fixed" else eps ** (1.0 + delta)
        config_eps = replace(config_template, eps=eps, k=k)
        config_ref = replace(config_eps, scheme_kind=ref_kind, eps=1.0)
        if config_eps.k_over_eps >= 1.0:
            print(
                f"warning: k/eps = {config_eps.k_over_eps:.3g} >= 1 at eps={eps:.3g}; "
                "the convergence condition k/eps -> 0 is violated"
            )
        stats.append(
            run_ensemble(
                mesh, config_ref, config_eps, n_samples, base_seed,
                threads=threads, ref_cache=ref_cache,
            )
        )
        k_values.append(config_eps.k)

    mse = np.array([s.mean_sq_error for s in stats])
    if len(eps_list) >= 2 and np.all(mse > 0):
        slope = float(np.polyfit(np.log(eps_list), np.log(mse), 1)[0])
    else:
        slope = float("nan")
    c_tilde = [float(m * h / np.sqrt(e)) for m, e in zip(mse, eps_list)]
    mode = "fixed-k" if k_mode == "fixed" else "recipe"
    return SweepResult(
        eps_values=eps_list, k_values=k_values, stats=stats,
        slope=slope, c_tilde=c_tilde, h=h, mode=mode,
    )


def stability_audit(meshes, config_template: SchemeConfig, n_samples: int,
                    base_seed: int, delta: float = 0.1,
                    h_values=None) -> dict:
    """Monte-Carlo estimate of the per-level energy bracket

        max_m |V^m|^2 + k nu sum_m |grad V^m|^2 + sum_m |V^m - V^{m-1}|^2

    across refinement levels with eps = h^(2+delta), k = eps^(1+delta).
    `h_values` overrides the per-mesh h fed to that recipe (default h_max).
    Flags blow-up when the estimate grows by more than x2 per level.
    """
    if h_values is not None and len(h_values) != len(meshes):
        raise ConfigurationError("h_values must match the number of meshes")
    levels = []
    for lvl, mesh in enumerate(meshes):
        h = mesh_stats(mesh)["h_max"] if h_values is None else float(h_values[lvl])
        eps = h ** (2.0 + delta)
        k = eps ** (1.0 + delta)
        config = replace(config_template, eps=eps, k=k)
        stepper = Stepper(mesh, config)
        brackets = []
        for s in range(n_samples):
            traj = run_path(config, base_seed, s, stepper=stepper)
            v_sq = [r.v_sq for r in traj.reports]
            grad = sum(r.grad_v_sq for r in traj.reports)
            jumps = sum(r.dv_sq for r in traj.reports)
            brackets.append(max(v_sq) + config.k * config.nu * grad + jumps)
        levels.append(
            {
                "h": h,
                "eps": eps,
                "k": config.k,
                "n_steps": config.n_steps,
                "bracket": float(np.mean(brackets)),
            }
        )

    flagged = False
    for prev, cur in zip(levels, levels[1:]):
        if prev["bracket"] > 0 and cur["bracket"] > 2.0 * prev["bracket"]:
            flagged = True
    return {"levels": levels, "blow_up_flagged": flagged}
