"""Entropic JKO gradient flows on the flat torus.

Proximal steps for the Schrödinger transport cost (log-domain Sinkhorn with a
spectral heat-kernel Gibbs kernel), a finite-volume reference solver for the
limiting drift-diffusion PDE, and tooling to measure how shrinking the
regularization and the time step together (eps/tau -> alpha) adds the
(alpha/2) Laplacian to the flow.
"""

__version__ = "0.1.0"

from .analysis import (
    SweepRow,
    compare_trajectories,
    l1_distance,
    pde_reference,
    run_sweep,
    wasserstein2_1d,
)
from .energy import (
    EnergySpec,
    InternalEnergy,
    entropy,
    eval_F,
    f_prime,
    first_variation,
    g_of,
)
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DomainError,
    GridMismatchError,
    LocalizationError,
)
from .jko import (
    JkoConfig,
    StepDiagnostics,
    Trajectory,
    marginal_update_root,
    optimality_residual,
    prox_step,
    run_flow,
)
from .measures import GridMeasure, two_bumps, uniform, wrapped_gaussian
from .pde_ref import PdeConfig, pde_step, solve_pde
from .schrodinger import (
    DualPotentials,
    SinkhornReport,
    cost_from_potentials,
    entropic_interpolation,
    forward_velocity,
    sinkhorn,
)
from .torus_grid import (
    Grid,
    HeatKernelOp,
    apply_heat,
    convolve,
    heat_kernel_op,
    make_grid,
    spectral_gradient,
    torus_cost,
)

__all__ = [
    "ConfigurationError", "ConvergenceError", "DomainError", "GridMismatchError",
    "LocalizationError",
    "Grid", "HeatKernelOp", "make_grid", "heat_kernel_op", "apply_heat",
    "spectral_gradient", "torus_cost", "convolve",
    "GridMeasure", "uniform", "wrapped_gaussian", "two_bumps",
    "DualPotentials", "SinkhornReport", "sinkhorn", "cost_from_potentials",
    "entropic_interpolation", "forward_velocity",
    "InternalEnergy", "EnergySpec", "eval_F", "f_prime", "g_of",
    "first_variation", "entropy",
    "JkoConfig", "StepDiagnostics", "Trajectory", "prox_step",
    "marginal_update_root", "run_flow", "optimality_residual",
    "PdeConfig", "solve_pde", "pde_step",
    "SweepRow", "l1_distance", "wasserstein2_1d", "compare_trajectories",
    "run_sweep", "pde_reference",
]
