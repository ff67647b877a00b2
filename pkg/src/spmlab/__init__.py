"""Numerical lab for the stochastic porous-medium equation with small noise."""
__version__ = "0.1.0"

from .coefficients import (MollifiedCoefficients, NoiseFamily, NoiseMode, Nonlinearity,
                           SampleGrid, check_hypothesis_H, eval_A, eval_a, eval_Psi, mollify,
                           noise_distance)
from .errors import ConfigError, PreconditionError, QuadratureError, SolverError
from .grid import Field, PeriodicGrid, Trajectory, l1_path_distance, laplacian_of_A, lp_norm
from .kernels import BACKEND
from .ldp import (RateEstimate, RateProblem, estimate_rate, small_noise_experiment,
                  weak_continuity_experiment)
from .skeleton import (Control, Entropy, SolverConfig, approximation_cauchy_study, bump_field,
                       entropy_residual, solve_skeleton)
from .spde import BrownianPath, solve_controlled_spde, solve_spde

__all__ = [
    "BACKEND", "BrownianPath", "ConfigError", "Control", "Entropy", "Field",
    "MollifiedCoefficients", "NoiseFamily", "NoiseMode", "Nonlinearity", "PeriodicGrid",
    "PreconditionError", "QuadratureError", "RateEstimate", "RateProblem", "SampleGrid",
    "SolverConfig", "SolverError", "Trajectory", "approximation_cauchy_study", "bump_field",
    "check_hypothesis_H", "entropy_residual", "estimate_rate", "eval_A", "eval_Psi", "eval_a",
    "l1_path_distance", "laplacian_of_A", "lp_norm", "mollify", "noise_distance",
    "small_noise_experiment", "solve_controlled_spde", "solve_skeleton", "solve_spde",
    "weak_continuity_experiment",
]
