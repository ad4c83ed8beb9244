"""Node-centered finite volumes for quasilinear diffusion-convection-reaction
problems with dual-weighted-residual goal error estimation."""

from .adaptivity import AdaptiveOptions, mark_elements, run_adaptive_loop
from .assembly import DiscreteSystem
from .dual import DualDiagram, build_dual_diagram
from .estimator import ErrorReport, estimate
from .mesh import Mesh, refine_mesh, unit_square_mesh, validate_primary_mesh
from .newton import SolverOptions, solve_primal
from .pipeline import RunSettings, solve_and_estimate
from .problems import get_goal, get_problem
from .recovery import recover_higher_order, solve_dual
from .schemes import UpwindScheme, get_scheme

__version__ = "0.1.0"

__all__ = [
    "AdaptiveOptions",
    "DiscreteSystem",
    "DualDiagram",
    "ErrorReport",
    "Mesh",
    "RunSettings",
    "SolverOptions",
    "UpwindScheme",
    "build_dual_diagram",
    "estimate",
    "get_goal",
    "get_problem",
    "get_scheme",
    "mark_elements",
    "recover_higher_order",
    "refine_mesh",
    "run_adaptive_loop",
    "solve_and_estimate",
    "solve_dual",
    "solve_primal",
    "unit_square_mesh",
    "validate_primary_mesh",
]
