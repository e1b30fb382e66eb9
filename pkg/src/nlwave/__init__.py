"""Pseudospectral solvers for wave equations with nonlocal initial conditions.

The package solves ``u_tt - Delta u + A u + F(u) = g`` on a periodic box with
conditions ``u(0) = phi + int alpha u`` and ``u_t(0) = psi + int beta u_t``.
"""

from .errors import (BlowupSuspected, BranchAmbiguityWarning, ConfigError, GridLeakWarning,
                     NonContraction, SingularModeSystem, TagMismatch, WindowExceeded)
from .grid import (Grid, NormSpec, SpectralField, forward, inverse, lq_norm, lq_sigma_norm,
                   sobolev_norm, y_norm)
from .linear import (ModeSystem, NonlocalProblem, SolutionTimeline, assemble_mode_system,
                     check_invertibility, evaluate_mild, solve_linear, solve_mode)
from .measures import (TimeMeasure, absolute_total, integrate_kernel, invertibility_margin,
                       product_integral, total)
from .operators import (ModeFunctions, OperatorConstructionError, OperatorFamily, build_wentzell,
                        check_wentzell_condition, cosine_apply, diagonal, matrix, power_apply,
                        rank_one, scalar, sine_apply)
from .oracle import oracle_solve_mode, oracle_solve_modes
from .picard import (NonlinearityDescriptor, PicardReport, apply_G, extend_solution, fbar_estimate,
                     power_law, select_window, solve_nonlinear)

__version__ = "0.1.0"

__all__ = [
    "BlowupSuspected",
    "BranchAmbiguityWarning",
    "ConfigError",
    "Grid",
    "GridLeakWarning",
    "ModeFunctions",
    "ModeSystem",
    "NonContraction",
    "NonlinearityDescriptor",
    "NonlocalProblem",
    "NormSpec",
    "OperatorConstructionError",
    "OperatorFamily",
    "PicardReport",
    "SingularModeSystem",
    "SolutionTimeline",
    "SpectralField",
    "TagMismatch",
    "TimeMeasure",
    "WindowExceeded",
    "absolute_total",
    "apply_G",
    "assemble_mode_system",
    "build_wentzell",
    "check_invertibility",
    "check_wentzell_condition",
    "cosine_apply",
    "diagonal",
    "evaluate_mild",
    "extend_solution",
    "fbar_estimate",
    "forward",
    "integrate_kernel",
    "inverse",
    "invertibility_margin",
    "lq_norm",
    "lq_sigma_norm",
    "matrix",
    "oracle_solve_mode",
    "oracle_solve_modes",
    "power_apply",
    "power_law",
    "product_integral",
    "rank_one",
    "scalar",
    "select_window",
    "sine_apply",
    "sobolev_norm",
    "solve_linear",
    "solve_mode",
    "solve_nonlinear",
    "total",
    "y_norm",
]
