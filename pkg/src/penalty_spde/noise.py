"""Truncated Karhunen-Loeve sampling of a Q-Wiener process on (0, L)^2.

Each of the two velocity components gets an independent expansion

    dW_c = sqrt(k) * sum_{i,j<=J} sqrt(lambda(i,j)) xi_c[i,j] e_ij(x, y)

with e_ij(x, y) = (2/L) sin(i pi x / L) sin(j pi y / L). On non-square
domains the same family is used as a restriction; it is then merely an
expansion basis, not a Laplacian eigenbasis.

RNG streams are counter-based: one independent generator per
(base_seed, sample_index, step_index) triple, so ensembles parallelize
without shared state and replays are bitwise reproducible.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .quadrature import quadrature_rule
from .spaces import DEFAULT_QUAD_DEGREE, FEFunction, FunctionSpace


@dataclass(frozen=True)
class NoiseModel:
    J: int
    lambdas: np.ndarray  # (J, J) positive eigenvalues
    domain_scale: float  # L of the sine family
    gamma_kind: str  # "additive" or "linear"
    amplitude: float  # additive: g = amplitude; linear: g(v) = amplitude * v

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.shape != (self.J, self.J):
            raise ConfigurationError("lambda table must be J x J")
        if np.any(lam <= 0):
            raise ConfigurationError("noise eigenvalues must be positive")
        object.__setattr__(self, "lambdas", lam)
        if self.gamma_kind not in ("additive", "linear"):
            raise ConfigurationError(f"unknown gamma kind {self.gamma_kind!r}")

    @property
    def trace(self):
        # two independent components, each with the same eigenvalue table
        return 2.0 * float(self.lambdas.sum())

    @property
    def lipschitz_constant(self):
        return 0.0 if self.gamma_kind == "additive" else abs(self.amplitude)

    def eigenfunction(self, i, j, x, y):
        L = self.domain_scale
        return (2.0 / L) * np.sin(i * np.pi * x / L) * np.sin(j * np.pi * y / L)

    def gamma(self, velocity_values):
        """Pointwise diffusion factor applied componentwise; shape like input."""
        if self.gamma_kind == "additive":
            return self.amplitude * np.ones_like(velocity_values)
        return self.amplitude * velocity_values


@dataclass(frozen=True)
class WienerIncrement:
    model: NoiseModel
    k: float
    xi: np.ndarray  # (2, J, J) standard normals

    def scaled_coefficients(self):
        """sqrt(k * lambda(i,j)) * xi; per-mode variance k*lambda(i,j)."""
        return np.sqrt(self.k * self.model.lambdas)[None, :, :] * self.xi

    def evaluate(self, x, y):
        """Increment field at points; returns array of shape x.shape + (2,)."""
        m = self.model
        L = m.domain_scale
        idx = np.arange(1, m.J + 1)
        sx = np.sin(np.multiply.outer(x, idx) * (np.pi / L))  # x.shape + (J,)
        sy = np.sin(np.multiply.outer(y, idx) * (np.pi / L))
        coef = self.scaled_coefficients() * (2.0 / L)
        out = np.empty(np.shape(x) + (2,))
        for c in range(2):
            out[..., c] = np.einsum("...i,ij,...j->...", sx, coef[c], sy)
        return out


def make_noise_model(J, lambda_kind="inverse-square-sum", domain_scale=5.0,
                     gamma_kind="additive", amplitude=1.0, lambda_table=None) -> NoiseModel:
    if J < 1:
        raise ConfigurationError("J must be >= 1")
    if lambda_kind == "inverse-square-sum":
        i = np.arange(1, J + 1)
        lam = 1.0 / (i[:, None] + i[None, :]) ** 2
    elif lambda_kind == "custom":
        if lambda_table is None:
            raise ConfigurationError("custom lambda kind requires lambda_table")
        lam = np.asarray(lambda_table, dtype=float)
    else:
        raise ConfigurationError(f"unknown lambda kind {lambda_kind!r}")
    return NoiseModel(J=J, lambdas=lam, domain_scale=float(domain_scale),
                      gamma_kind=gamma_kind, amplitude=float(amplitude))


def stream(base_seed: int, sample_index: int, step_index: int) -> np.random.Generator:
    """Independent generator for one (sample, step) cell of the ensemble."""
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(sample_index, step_index))
    return np.random.Generator(np.random.Philox(ss))


def sample_increment(model: NoiseModel, rng: np.random.Generator, k: float) -> WienerIncrement:
    if k <= 0:
        raise ConfigurationError("time step must be positive")
    xi = rng.standard_normal((2, model.J, model.J))
    return WienerIncrement(model=model, k=k, xi=xi)


def noise_load_vector(model: NoiseModel, increment: WienerIncrement,
                      prev_velocity: FEFunction, vel_space: FunctionSpace,
                      tab=None, pts=None) -> np.ndarray:
    """Entries integral gamma(V_prev) dW phi_i, increment evaluated analytically.

    `tab` = (rule, phi, gphi, det) and `pts` = physical quadrature points can
    be precomputed by the caller to avoid per-step re-tabulation.
    """
    if tab is None:
        rule = quadrature_rule(DEFAULT_QUAD_DEGREE)
        phi, _, det = vel_space.tabulate(rule)
    else:
        rule, phi, _, det = tab
    if pts is None:
        pts = vel_space.physical_points(rule.points)
    dw = increment.evaluate(pts[..., 0], pts[..., 1])  # (nt, nq, 2)
    if model.gamma_kind == "additive":
        integrand = model.amplitude * dw
    else:
        vprev = prev_velocity.cell_values(phi)
        integrand = model.gamma(vprev) * dw

    b = np.zeros(vel_space.n_dofs)
    wphi = rule.weights[:, None] * phi
    for c in range(2):
        local = np.einsum("t,tq,qa->ta", det, integrand[:, :, c], wphi)
        np.add.at(b, c * vel_space.n_scalar + vel_space.cell_dofs, local)
    return b
