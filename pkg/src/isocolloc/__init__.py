"""Isogeometric collocation with B-splines and NURBS.

Spline spaces, geometry maps, collocation point selection, collocation and
Galerkin solvers, error analysis and a benchmark command line.
"""

from .analysis import ErrorReport, PerturbationSpec, convergence_rates, error_norms, perturb_knots
from .geometry import make_identity, make_quarter_annulus, make_rhombus
from .point_selection import CollocationSet, select_asp, select_csp, select_gp, select_lssp, tensorize
from .problems import REGISTRY, get_problem
from .solver import (
    Problem1D,
    Problem2D,
    SingularSystemError,
    assemble_collocation_1d,
    assemble_collocation_2d,
    assemble_galerkin,
    solve,
    solve_system,
)
from .spline_core import KnotVector, SplineSpace1D, TensorSpace, make_open_uniform, make_periodic_uniform
from .study import StudyConfig, run_compare, run_convergence, run_residual, solve_problem

__version__ = "0.1.0"
