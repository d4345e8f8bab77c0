"""Normalized ground states of planar coupled Schrodinger systems with
exponential-growth couplings: radial discretization, constrained solver and
numerical checks of the accompanying inequalities."""

__version__ = "0.1.0"

from .errors import (ConfigError, DegenerateStateError, InvalidPathError, NlsError,
                     NoMaximizerError, NonConvergenceError, NonUniquenessError,
                     ParseError, RangeError, RefusedError)
from .grid import (RadialFunction, RadialGrid, grad_norm_sq, integrate, make_grid, mass,
                   radial_laplacian, tail_mass_fraction)
from .nonlinearity import (AuditReport, NonlinearityModel, audit_hypotheses, eval_grad_H,
                           eval_H, eval_tilde_H)
from .functional import (FunctionalValues, StatePair, energy, energy_gradient, evaluate,
                         fiber_derivative, fiber_energy, fiber_second_derivative,
                         gaussian_pair, lagrange_multipliers, pohozaev, resample_scaled)
from .manifold import MassConstraint, fiber_maximizer, project_mass, project_pohozaev
from .verify import BoundsReport, check_bounds, geometry_probe, gn_check, tm_integral
from .solver import (GroundStateSolver, SolveReport, SolverConfig, VerifySettings,
                     mountain_pass_upper_bound, solve_ground_state, sweep_mu)
from .cli_io import parse_config, read_report, run_cli, write_report

__all__ = [
    "ConfigError", "DegenerateStateError", "InvalidPathError", "NlsError", "NoMaximizerError",
    "NonConvergenceError", "NonUniquenessError", "ParseError", "RangeError", "RefusedError",
    "RadialFunction", "RadialGrid", "grad_norm_sq", "integrate", "make_grid", "mass",
    "radial_laplacian", "tail_mass_fraction", "AuditReport", "NonlinearityModel",
    "audit_hypotheses", "eval_grad_H", "eval_H", "eval_tilde_H", "FunctionalValues",
    "StatePair", "energy", "energy_gradient", "evaluate", "fiber_derivative", "fiber_energy",
    "fiber_second_derivative", "gaussian_pair", "lagrange_multipliers", "pohozaev",
    "resample_scaled", "MassConstraint", "fiber_maximizer", "project_mass",
    "project_pohozaev", "BoundsReport", "check_bounds", "geometry_probe", "gn_check",
    "tm_integral", "GroundStateSolver", "SolveReport", "SolverConfig", "VerifySettings",
    "mountain_pass_upper_bound", "solve_ground_state", "sweep_mu", "parse_config",
    "read_report", "run_cli", "write_report",
]
