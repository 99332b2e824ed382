"""Time-stepping engines for the penalized and saddle-point discretizations.

Five scheme kinds share one linear-step core:

    penalty-nonlinear   implicit convection, solved by Picard iteration
    penalty-linear      convection linearized around the previous step
    saddle              exactly divergence-free reference scheme
    stokes-penalty      penalty scheme with convection switched off
    stokes-saddle       saddle scheme with convection switched off

The penalty block system per step reads

    [M + k nu A (+ k N(wind)),  -k B^T] [V]   [M V_prev + k F + G      ]
    [k B,                      eps M_p] [P] = [eps M_p P_prev           ]

and the saddle system replaces the pressure row by B V = 0 plus a scalar
zero-mean multiplier. Dirichlet velocity values enter by row replacement
with column symmetrization.
"""

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    convection_matrix,
    divergence_matrix,
    load_vector,
    mass_matrix,
    stiffness_matrix,
    trilinear_eval,
)
from .errors import ConfigurationError, SolverError, StepError
from .mesh import Mesh
from .noise import NoiseModel, noise_load_vector, sample_increment, stream
from .quadrature import quadrature_rule
from .spaces import (
    DEFAULT_QUAD_DEGREE,
    ConstraintSet,
    FEFunction,
    build_space,
    dirichlet_constraints,
    l2_project,
)

SCHEME_KINDS = (
    "penalty-nonlinear",
    "penalty-linear",
    "saddle",
    "stokes-penalty",
    "stokes-saddle",
)

_PENALTY_KINDS = ("penalty-nonlinear", "penalty-linear", "stokes-penalty")
_CONVECTIVE_KINDS = ("penalty-nonlinear", "penalty-linear", "saddle")


@dataclass(frozen=True)
class SchemeConfig:
    """All parameters of one scheme run; k is snapped so that T = M k."""

    nu: float
    eps: float
    k: float
    T: float
    scheme_kind: str
    picard_max_iters: int = 50
    picard_tol: float = 1e-10
    linear_tol: float = 1e-9
    forcing: object = None  # callable f(t, x, y) -> (fx, fy), or None
    noise_model: NoiseModel = None
    boundary_values: dict = None  # tag -> callable, optional "default"
    initial_velocity: object = None  # callable (x, y) -> (vx, vy), or None
    initial_pressure: object = None  # callable (x, y) -> p, or None

    def __post_init__(self):
        if self.nu <= 0:
            raise ConfigurationError("viscosity nu must be positive")
        if self.scheme_kind not in SCHEME_KINDS:
            raise ConfigurationError(f"unknown scheme kind {self.scheme_kind!r}")
        if self.scheme_kind in _PENALTY_KINDS:
            if not (0 < self.eps <= 1):
                raise ConfigurationError("penalty scale must satisfy 0 < eps <= 1")
        if self.k <= 0 or self.T <= 0:
            raise ConfigurationError("k and T must be positive")
        M = max(1, round(self.T / self.k))
        object.__setattr__(self, "k", self.T / M)

    @property
    def n_steps(self):
        return round(self.T / self.k)

    @property
    def k_over_eps(self):
        return self.k / self.eps

    @property
    def includes_convection(self):
        return self.scheme_kind in _CONVECTIVE_KINDS


@dataclass(frozen=True)
class State:
    m: int
    V: FEFunction
    P: FEFunction
    t: float = 0.0


@dataclass
class EnergyReport:
    m: int
    t: float
    v_sq: float
    grad_v_sq: float
    dv_sq: float
    eps_p_sq: float
    eps_dp_sq: float
    work_f: float
    work_noise: float
    bhat_term: float
    residual: float
    pressure_mean: float


@dataclass
class Trajectory:
    config: SchemeConfig
    states: list  # recorded State objects (always includes step 0 and M)
    reports: list  # EnergyReport per step 1..M
    replay_hash: str

    @property
    def final(self):
        return self.states[-1]


def _norm_sq(matrix, x):
    return float(x @ (matrix @ x))


class Stepper:
    """Assembled operators for one (mesh, config) pair, reused across paths."""

    def __init__(self, mesh: Mesh, config: SchemeConfig):
        self.mesh = mesh
        self.config = config
        self.vel_space = build_space(mesh, 2, 2)
        self.pres_space = build_space(mesh, 1, 1)
        self.M = mass_matrix(self.vel_space)
        self.A = stiffness_matrix(self.vel_space)
        self.B = divergence_matrix(self.vel_space, self.pres_space)
        self.Mp = mass_matrix(self.pres_space)
        self.mean_vector = np.asarray(
            self.Mp @ np.ones(self.pres_space.n_dofs)
        ).ravel()
        self.area = float(self.mean_vector.sum())
        if config.boundary_values:
            self.constraints = dirichlet_constraints(
                self.vel_space, config.boundary_values
            )
        else:
            self.constraints = ConstraintSet(
                np.zeros(0, dtype=np.int64), np.zeros(0)
            )
        self._lu_cache = {}
        self._base_cache = {}
        rule = quadrature_rule(DEFAULT_QUAD_DEGREE)
        self._tab = (rule,) + self.vel_space.tabulate(rule)
        self._qpts = self.vel_space.physical_points(rule.points)

    # -- initial data ------------------------------------------------------

    def initial_state(self) -> State:
        cfg = self.config
        if cfg.initial_velocity is None:
            V = FEFunction(self.vel_space, np.zeros(self.vel_space.n_dofs))
        else:
            V = l2_project(self.vel_space, _as_vector_callable(cfg.initial_velocity))
        if cfg.initial_pressure is None:
            P = FEFunction(self.pres_space, np.zeros(self.pres_space.n_dofs))
        else:
            P = l2_project(self.pres_space, cfg.initial_pressure)
        if cfg.scheme_kind in _PENALTY_KINDS:
            # L_h sits inside L^2_0: remove the mean once at t = 0; the
            # penalty update conserves it afterwards under homogeneous BC.
            mean = float(self.mean_vector @ P.coefficients) / self.area
            P = FEFunction(self.pres_space, P.coefficients - mean)
        return State(0, V, P, 0.0)

    # -- per-step right-hand-side pieces ----------------------------------

    def forcing_vector(self, m):
        cfg = self.config
        if cfg.forcing is None:
            return np.zeros(self.vel_space.n_dofs)
        return load_vector(self.vel_space, cfg.forcing, (m - 1) * cfg.k, m * cfg.k)

    def noise_vector(self, increment, prev_velocity):
        if increment is None:
            return np.zeros(self.vel_space.n_dofs)
        return noise_load_vector(
            self.config.noise_model, increment, prev_velocity, self.vel_space,
            tab=self._tab, pts=self._qpts,
        )

    # -- linear algebra core ----------------------------------------------

    def _constrain(self, S, rhs):
        idx = self.constraints.indices
        if idx.size == 0:
            return S.tocsc(), rhs
        n = S.shape[0]
        z = np.zeros(n)
        z[idx] = self.constraints.values
        rhs = rhs - S @ z
        keep = np.ones(n)
        keep[idx] = 0.0
        P = sp.diags(keep)
        D = sp.diags(1.0 - keep)
        S = (P @ S @ P + D).tocsc()
        rhs[idx] = self.constraints.values
        return S, rhs

    def _check_residual(self, S, x, rhs):
        resid = np.linalg.norm(S @ x - rhs)
        scale = 1.0 + np.linalg.norm(rhs)
        if not np.isfinite(resid) or resid > self.config.linear_tol * scale:
            raise SolverError(
                f"linear solve residual {resid:.3e} exceeds tolerance "
                f"{self.config.linear_tol:.1e} (rhs scale {scale:.3e})"
            )
        return x

    def _solve(self, S, rhs, cache_key=None):
        S, rhs = self._constrain(S, rhs)
        if cache_key is not None:
            lu = self._lu_cache.get(cache_key)
            if lu is None:
                lu = spla.splu(S)
                self._lu_cache[cache_key] = lu
        else:
            lu = spla.splu(S)
        return self._check_residual(S, lu.solve(rhs), rhs)

    def _base_lu(self, key, build):
        """Constrained LU of a wind-independent base system, built on demand."""
        lu = self._base_cache.get(key)
        if lu is None:
            S0 = build()
            S0, _ = self._constrain(S0, np.zeros(S0.shape[0]))
            lu = spla.splu(S0)
            self._base_cache[key] = lu
        return lu

    def _solve_perturbed(self, S, rhs, base_key, build_base):
        """Direct-preconditioned GMRES for a small perturbation of a cached base.

        The convective system differs from the wind-free one by k N(wind),
        a contraction for moderate k, so a few Krylov iterations with the
        base LU as preconditioner reach direct-solve accuracy. Falls back
        to a fresh factorization if the iteration stalls.
        """
        S, rhs = self._constrain(S, rhs)
        lu = self._base_lu(base_key, build_base)
        prec = spla.LinearOperator(S.shape, matvec=lu.solve)
        x0 = lu.solve(rhs)
        x, info = spla.gmres(
            S, rhs, x0=x0, M=prec, rtol=1e-13, atol=0.0, maxiter=40
        )
        if info != 0:
            x = spla.splu(S).solve(rhs)
        return self._check_residual(S, x, rhs)

    def _penalty_system(self, wind, include_convection):
        cfg = self.config
        TL = self.M + cfg.k * cfg.nu * self.A
        if include_convection:
            TL = TL + cfg.k * convection_matrix(self.vel_space, wind, tab=self._tab)
        return sp.bmat(
            [[TL, -cfg.k * self.B.T], [cfg.k * self.B, cfg.eps * self.Mp]],
            format="csr",
        )

    def solve_penalty_linear(self, state, Fm, Gm, wind=None, include_convection=True):
        cfg = self.config
        n_v = self.vel_space.n_dofs
        if wind is None:
            wind = state.V
        S = self._penalty_system(wind, include_convection)
        rhs = np.concatenate(
            [
                self.M @ state.V.coefficients + cfg.k * Fm + Gm,
                cfg.eps * (self.Mp @ state.P.coefficients),
            ]
        )
        if include_convection:
            x = self._solve_perturbed(
                S, rhs, "penalty", lambda: self._penalty_system(None, False)
            )
        else:
            x = self._solve(S, rhs, cache_key="stokes-penalty")
        V = FEFunction(self.vel_space, x[:n_v])
        P = FEFunction(self.pres_space, x[n_v:])
        return State(state.m + 1, V, P, (state.m + 1) * cfg.k)

    def _saddle_system(self, wind, include_convection):
        cfg = self.config
        TL = self.M + cfg.k * cfg.nu * self.A
        if include_convection:
            TL = TL + cfg.k * convection_matrix(self.vel_space, wind, tab=self._tab)
        c = sp.csr_matrix(self.mean_vector.reshape(-1, 1))
        return sp.bmat(
            [[TL, -cfg.k * self.B.T, None], [self.B, None, c], [None, c.T, None]],
            format="csr",
        )

    def solve_saddle(self, state, Fm, Gm, include_convection=True):
        cfg = self.config
        n_v = self.vel_space.n_dofs
        n_p = self.pres_space.n_dofs
        S = self._saddle_system(state.V, include_convection)
        rhs = np.concatenate(
            [self.M @ state.V.coefficients + cfg.k * Fm + Gm, np.zeros(n_p + 1)]
        )
        if include_convection:
            x = self._solve_perturbed(
                S, rhs, "saddle", lambda: self._saddle_system(None, False)
            )
        else:
            x = self._solve(S, rhs, cache_key="stokes-saddle")
        V = FEFunction(self.vel_space, x[:n_v])
        P = FEFunction(self.pres_space, x[n_v : n_v + n_p])
        return State(state.m + 1, V, P, (state.m + 1) * cfg.k)

    # -- scheme steps ------------------------------------------------------

    def step_penalty_linear(self, state, Fm, Gm):
        return self.solve_penalty_linear(state, Fm, Gm, include_convection=True)

    def step_stokes_penalty(self, state, Fm, Gm):
        return self.solve_penalty_linear(state, Fm, Gm, include_convection=False)

    def step_saddle(self, state, Fm, Gm):
        return self.solve_saddle(state, Fm, Gm, include_convection=True)

    def step_stokes_saddle(self, state, Fm, Gm):
        return self.solve_saddle(state, Fm, Gm, include_convection=False)

    def step_penalty_nonlinear(self, state, Fm, Gm):
        cfg = self.config
        wind = state.V
        new = None
        for _ in range(cfg.picard_max_iters):
            new = self.solve_penalty_linear(state, Fm, Gm, wind=wind)
            diff = new.V.coefficients - wind.coefficients
            delta = np.sqrt(_norm_sq(self.M, diff))
            scale = 1.0 + np.sqrt(_norm_sq(self.M, new.V.coefficients))
            wind = new.V
            if delta <= cfg.picard_tol * scale:
                return new
        if cfg.picard_max_iters == 1:
            # single-iteration mode degenerates to the linearized scheme
            return new
        raise StepError(
            f"Picard iteration did not converge in {cfg.picard_max_iters} "
            f"iterations (last update {delta:.3e})",
            step_index=state.m + 1,
            residual=delta,
        )

    def step(self, state, Fm, Gm):
        kind = self.config.scheme_kind
        if kind == "penalty-linear":
            return self.step_penalty_linear(state, Fm, Gm)
        if kind == "penalty-nonlinear":
            return self.step_penalty_nonlinear(state, Fm, Gm)
        if kind == "saddle":
            return self.step_saddle(state, Fm, Gm)
        if kind == "stokes-penalty":
            return self.step_stokes_penalty(state, Fm, Gm)
        if kind == "stokes-saddle":
            return self.step_stokes_saddle(state, Fm, Gm)
        raise ConfigurationError(f"unknown scheme kind {kind!r}")

    # -- diagnostics -------------------------------------------------------

    def energy_ledger(self, prev: State, nxt: State, Fm, Gm) -> EnergyReport:
        """Residual of the exact per-step discrete energy identity."""
        cfg = self.config
        v_sq = _norm_sq(self.M, nxt.V.coefficients)
        v_prev_sq = _norm_sq(self.M, prev.V.coefficients)
        dv = nxt.V.coefficients - prev.V.coefficients
        dv_sq = _norm_sq(self.M, dv)
        grad_sq = _norm_sq(self.A, nxt.V.coefficients)
        p_sq = _norm_sq(self.Mp, nxt.P.coefficients)
        p_prev_sq = _norm_sq(self.Mp, prev.P.coefficients)
        dp = nxt.P.coefficients - prev.P.coefficients
        dp_sq = _norm_sq(self.Mp, dp)
        work_f = cfg.k * float(Fm @ nxt.V.coefficients)
        work_g = float(Gm @ nxt.V.coefficients)

        if cfg.includes_convection:
            wind = prev.V if cfg.scheme_kind != "penalty-nonlinear" else nxt.V
            bhat = cfg.k * trilinear_eval(wind, nxt.V, nxt.V, tab=self._tab)
        else:
            bhat = 0.0

        lhs = (
            0.5 * (v_sq - v_prev_sq + dv_sq)
            + cfg.k * cfg.nu * grad_sq
            + bhat
        )
        if cfg.scheme_kind in _PENALTY_KINDS:
            lhs += 0.5 * cfg.eps * (p_sq - p_prev_sq + dp_sq)
        rhs = work_f + work_g
        scale = max(
            abs(v_sq), abs(v_prev_sq), cfg.k * cfg.nu * grad_sq, abs(rhs), 1e-300
        )
        residual = abs(lhs - rhs) / scale
        mean = float(self.mean_vector @ nxt.P.coefficients)
        return EnergyReport(
            m=nxt.m,
            t=nxt.m * cfg.k,
            v_sq=v_sq,
            grad_v_sq=grad_sq,
            dv_sq=dv_sq,
            eps_p_sq=cfg.eps * p_sq,
            eps_dp_sq=cfg.eps * dp_sq,
            work_f=work_f,
            work_noise=work_g,
            bhat_term=bhat,
            residual=residual,
            pressure_mean=mean,
        )

    def l4_norm4(self, u: FEFunction) -> float:
        """Integral of |u|^4 (degree-6 quadrature; slightly inexact for P2)."""
        rule = quadrature_rule(6)
        from .spaces import ref_basis

        phi = ref_basis(self.vel_space.degree, rule.points)
        vals = u.cell_values(phi)
        mag4 = (vals[..., 0] ** 2 + vals[..., 1] ** 2) ** 2
        _, _, det = self.vel_space.tabulate(rule)
        return float(np.einsum("q,tq,t->", rule.weights, mag4, det))


def _as_vector_callable(func):
    def wrapped(x, y):
        return func(x, y)

    return wrapped


def monotonicity_check(stepper: Stepper, u: FEFunction, w: FEFunction,
                       nu: float, noise_model: NoiseModel = None) -> float:
    """Discrete value of the local monotonicity functional for the pair (u, w).

    nu |grad z|^2 + bhat(u,u,z) - bhat(w,w,z)
        + 27/(2 nu^3) |w|_{L4}^4 |z|^2 - L_g^2 |z|^2,   z = u - w.
    """
    z = FEFunction(stepper.vel_space, u.coefficients - w.coefficients)
    grad_sq = _norm_sq(stepper.A, z.coefficients)
    z_sq = _norm_sq(stepper.M, z.coefficients)
    bhat_diff = trilinear_eval(u, u, z) - trilinear_eval(w, w, z)
    w_l4 = stepper.l4_norm4(w)
    lg = noise_model.lipschitz_constant if noise_model is not None else 0.0
    return (
        nu * grad_sq
        + bhat_diff
        + 27.0 / (2.0 * nu**3) * w_l4 * z_sq
        - lg**2 * z_sq
    )


def poincare_constant(stepper: Stepper) -> float:
    """Numerical surrogate 1/sqrt(lambda_min) of the Dirichlet Laplacian."""
    idx = stepper.constraints.indices
    n = stepper.vel_space.n_dofs
    free = np.setdiff1d(np.arange(n), idx)
    A = stepper.A.tocsr()[free][:, free]
    M = stepper.M.tocsr()[free][:, free]
    vals = spla.eigsh(A, k=1, M=M, sigma=0, which="LM", return_eigenvectors=False)
    lam_min = float(vals[0])
    return 1.0 / np.sqrt(lam_min)


def run_path(config: SchemeConfig, base_seed: int, sample_index: int,
             mesh: Mesh = None, stepper: Stepper = None,
             record_states: bool = False, on_step=None) -> Trajectory:
    """Drive M steps of the configured scheme along one noise path.

    Deterministic in (config, base_seed, sample_index). `on_step(state)` is
    called after every step; `record_states` keeps all intermediate states.
    """
    if stepper is None:
        if mesh is None:
            raise ConfigurationError("run_path needs either a mesh or a stepper")
        stepper = Stepper(mesh, config)
    cfg = stepper.config
    state = stepper.initial_state()
    states = [state]
    reports = []
    hasher = hashlib.sha256()
    for m in range(1, cfg.n_steps + 1):
        Fm = stepper.forcing_vector(m)
        if cfg.noise_model is not None:
            rng = stream(base_seed, sample_index, m)
            incr = sample_increment(cfg.noise_model, rng, cfg.k)
            hasher.update(incr.xi.tobytes())
            Gm = stepper.noise_vector(incr, state.V)
        else:
            Gm = np.zeros(stepper.vel_space.n_dofs)
        try:
            new = stepper.step(state, Fm, Gm)
        except (SolverError, StepError) as exc:
            raise StepError(
                f"step {m} failed: {exc}", step_index=m
            ) from exc
        reports.append(stepper.energy_ledger(state, new, Fm, Gm))
        if record_states:
            states.append(new)
        if on_step is not None:
            on_step(new)
        state = new
    if not record_states:
        states.append(state)
    return Trajectory(
        config=cfg, states=states, reports=reports, replay_hash=hasher.hexdigest()
    )


def ledger_rows(trajectory: Trajectory):
    """CSV rows (one per step) for the per-step energy ledger."""
    cfg = trajectory.config
    rows = []
    for r in trajectory.reports:
        rows.append(
            [
                r.m,
                repr(r.t),
                repr(r.v_sq),
                repr(r.grad_v_sq),
                repr(r.dv_sq),
                repr(r.eps_p_sq),
                repr(r.eps_dp_sq),
                repr(r.work_f),
                repr(r.work_noise),
                repr(r.residual),
                repr(cfg.k_over_eps),
            ]
        )
    return rows


LEDGER_HEADER = [
    "m",
    "t",
    "v_l2_sq",
    "grad_v_l2_sq",
    "dv_l2_sq",
    "eps_p_l2_sq",
    "eps_dp_l2_sq",
    "work_f",
    "work_noise",
    "residual",
    "k_over_eps",
]
