"""Homogenization of the Neumann problem on thin domains with oscillating boundary."""
from .cell import CellSolutions, compute_r, solve_cell, solve_theta, solve_X
from .correctors import TruncationField, corrector_terms, eval_truncation, grad_truncation
from .estimator import HomogenizedCorrector
from .exceptions import CompatibilityError, ConvergenceError, DomainError, MeshError
from .fem2d import solve_neumann
from .geometry import PeriodicProfile, SourceFunction, TabulatedSource, map_to_cell
from .homogenized1d import HomogenizedSolution, compute_fhat_f0, eval_w0_derivs, solve_w0
from .mesh import build_cell_mesh, build_thin_mesh, locate_point
from .study import StudyConfig, emit_report, run_case, run_sweep_and_fit

__version__ = "0.1.0"
