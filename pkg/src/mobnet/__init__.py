"""Stochastic mobile reaction networks and their fluid/PDE limits.

Population CTMCs on a bordered square lattice, exact replica simulation,
the spatial ODE fluid limit, an explicit finite-difference solver for
the limiting reaction-diffusion system, and a free-walk displacement
oracle for the space-scaling rule.
"""

from .ctmc import (PopulationState, ReplicaEstimate, Trajectory,
                   build_initial_state, off_fraction, run_replicas, simulate,
                   step)
from .fluid import (DensityField, FluidTrajectory, default_dt,
                    discrete_laplacian, integrate_euler, integrate_rk4,
                    spatial_rhs, stationary_rhs)
from .freewalk import FreeWalkConfig, msd, msd_theory, walk_samples
from .model import (InitialField, LatticeGrid, NetworkSpec, ParameterField,
                    Reaction, SpecError, parse_spec, serialize_spec, theta)
from .pde import (FDConfig, PDESolution, fd_step, field_fraction,
                  lipschitz_clamp, refine_and_compare, solve_pde,
                  step_size_for)
from .ratelaws import ExprError, parse_expr
from .scenarios import SCENARIOS

__version__ = "0.1.0"

__all__ = [
    "PopulationState", "ReplicaEstimate", "Trajectory", "build_initial_state",
    "off_fraction", "run_replicas", "simulate", "step",
    "DensityField", "FluidTrajectory", "default_dt", "discrete_laplacian",
    "integrate_euler", "integrate_rk4", "spatial_rhs", "stationary_rhs",
    "FreeWalkConfig", "msd", "msd_theory", "walk_samples",
    "InitialField", "LatticeGrid", "NetworkSpec", "ParameterField",
    "Reaction", "SpecError", "parse_spec", "serialize_spec", "theta",
    "FDConfig", "PDESolution", "fd_step", "field_fraction",
    "lipschitz_clamp", "refine_and_compare", "solve_pde", "step_size_for",
    "ExprError", "parse_expr", "SCENARIOS",
    "__version__",
]
