"""Variational solver for semilinear Dirichlet problems on the Sierpinski gasket."""
from .gasket import GasketLevel, build_level, measure_weights, vertex_count
from .energy import DiscreteFunction, energy, harmonic_extension, stiffness_matrix
from .nonlinearity import ExampleF1, Nonlinearity, PowerSum, ProblemSpec, power_problem
from .functional import FunctionalContext, eval_I, residual_norm, weak_residual
from .critical import (SolutionReport, SolverOptions, minimize, minimize_in_ball,
                       mountain_pass, three_solutions)
from .thresholds import compute_constants, compute_u_lambda, estimate_rho2, threshold_report

__version__ = "0.1.0"

__all__ = [
    "GasketLevel", "build_level", "measure_weights", "vertex_count",
    "DiscreteFunction", "energy", "harmonic_extension", "stiffness_matrix",
    "ExampleF1", "Nonlinearity", "PowerSum", "ProblemSpec", "power_problem",
    "FunctionalContext", "eval_I", "residual_norm", "weak_residual",
    "SolutionReport", "SolverOptions", "minimize", "minimize_in_ball",
    "mountain_pass", "three_solutions",
    "compute_constants", "compute_u_lambda", "estimate_rho2", "threshold_report",
]
