"""Finite-element penalty schemes for stochastic incompressible Navier-Stokes.

Taylor-Hood (P2/P1) discretization on unstructured triangle meshes, Euler
time stepping with a pressure-penalty relaxation of the divergence
constraint, Q-Wiener forcing via truncated Karhunen-Loeve expansions, and a
paired-path Monte-Carlo harness comparing the penalized schemes against an
exactly divergence-free saddle-point reference.
"""

from .assembly import (
    convection_matrix,
    divergence_matrix,
    load_vector,
    mass_matrix,
    stiffness_matrix,
    trilinear_eval,
)
from .ensemble import EnsembleStats, SweepResult, epsilon_sweep, run_ensemble, stability_audit
from .errors import (
    ConfigurationError,
    InvalidGeometryError,
    MeshParseError,
    PenaltySpdeError,
    SolverError,
    StepError,
)
from .mesh import (
    Mesh,
    generate_l_shape,
    generate_rect_mesh,
    load_mesh,
    load_msh,
    mesh_stats,
    save_mesh,
)
from .noise import (
    NoiseModel,
    WienerIncrement,
    make_noise_model,
    noise_load_vector,
    sample_increment,
    stream,
)
from .quadrature import QuadRule, quadrature_rule
from .schemes import (
    SCHEME_KINDS,
    EnergyReport,
    SchemeConfig,
    State,
    Stepper,
    Trajectory,
    monotonicity_check,
    poincare_constant,
    run_path,
)
from .spaces import (
    ConstraintSet,
    FEFunction,
    FunctionSpace,
    build_space,
    dirichlet_constraints,
    l2_project,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ConstraintSet",
    "EnergyReport",
    "EnsembleStats",
    "FEFunction",
    "FunctionSpace",
    "InvalidGeometryError",
    "Mesh",
    "MeshParseError",
    "NoiseModel",
    "PenaltySpdeError",
    "QuadRule",
    "SCHEME_KINDS",
    "SchemeConfig",
    "SolverError",
    "State",
    "StepError",
    "Stepper",
    "SweepResult",
    "Trajectory",
    "WienerIncrement",
    "build_space",
    "convection_matrix",
    "dirichlet_constraints",
    "divergence_matrix",
    "epsilon_sweep",
    "generate_l_shape",
    "generate_rect_mesh",
    "l2_project",
    "load_mesh",
    "load_msh",
    "load_vector",
    "make_noise_model",
    "mass_matrix",
    "mesh_stats",
    "monotonicity_check",
    "noise_load_vector",
    "poincare_constant",
    "quadrature_rule",
    "run_ensemble",
    "run_path",
    "sample_increment",
    "save_mesh",
    "stability_audit",
    "stiffness_matrix",
    "stream",
    "trilinear_eval",
]
