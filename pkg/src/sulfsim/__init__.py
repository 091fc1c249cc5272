"""sulfsim: particle and finite-difference solvers for a path-dependent
reaction-advection-diffusion model of marble sulphation.

The same nonlocal PDE is realized three ways: a weighted (discounted)
interacting particle system, a killed interacting particle system, and a
deterministic finite-difference reference; plus a Picard fixed-point
harness over frozen particle paths and comparison metrics tying them
together.
"""

__version__ = "0.1.0"

from .config import (
    ConfigError,
    Grid1D,
    InitialDensitySpec,
    KernelSpec,
    PhysicalParams,
    SimConfig,
    load_config,
    validate_config,
)
from .dynamics import DriftArgs, drift_b, reaction_rate, recover_calcite
from .fields import (
    AccumulatedFields,
    TrajectoryArchive,
    accumulate_step,
    exact_history_args,
    interpolate,
)
from .fixedpoint import apply_mkfk_map, picard_solve
from .kernel import WeightedPointCloud, kernel_grad, kernel_value, mollify, mollify_grad
from .metrics import convergence_study, density_distance, total_mass
from .particles import (
    ParticleEnsemble,
    SimulationOutput,
    em_step,
    init_ensemble,
    run_coupled,
    run_simulation,
    update_hazards,
)
from .pde import PdeState, pde_step, solve_pde

__all__ = [
    "AccumulatedFields",
    "ConfigError",
    "DriftArgs",
    "Grid1D",
    "InitialDensitySpec",
    "KernelSpec",
    "ParticleEnsemble",
    "PdeState",
    "PhysicalParams",
    "SimConfig",
    "SimulationOutput",
    "TrajectoryArchive",
    "WeightedPointCloud",
    "accumulate_step",
    "apply_mkfk_map",
    "convergence_study",
    "density_distance",
    "drift_b",
    "em_step",
    "exact_history_args",
    "init_ensemble",
    "interpolate",
    "kernel_grad",
    "kernel_value",
    "load_config",
    "mollify",
    "mollify_grad",
    "pde_step",
    "picard_solve",
    "reaction_rate",
    "recover_calcite",
    "run_coupled",
    "run_simulation",
    "solve_pde",
    "total_mass",
    "update_hazards",
    "validate_config",
]
