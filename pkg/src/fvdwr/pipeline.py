"""One solve-dual-recover-estimate pass on a fixed mesh."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import DiscreteSystem
from .dual import build_dual_diagram
from .estimator import ErrorReport, estimate, reference_goal
from .newton import ConvergenceLog, SolverOptions, solve_primal
from .recovery import solve_dual
from .schemes import UpwindScheme


@dataclass(frozen=True)
class RunSettings:
    dual_kind: str = "voronoi"
    scheme: UpwindScheme = field(default_factory=UpwindScheme)
    mode: str = "fv"
    dual_method: str = "galerkin"
    recovery: str = "p2"
    quad_degree: int = 5
    reference_degree: int = 12
    solver: SolverOptions = field(default_factory=SolverOptions)


@dataclass
class CycleResult:
    mesh: object
    diagram: object
    system: DiscreteSystem
    u: np.ndarray
    z: np.ndarray
    report: ErrorReport
    newton: ConvergenceLog


def solve_and_estimate(problem, goal, mesh, settings: RunSettings, initial=None, diagram=None) -> CycleResult:
    diagram = diagram if diagram is not None else build_dual_diagram(mesh, settings.dual_kind)
    system = DiscreteSystem(problem, diagram, settings.scheme, mode=settings.mode, quad_degree=settings.quad_degree)
    u, hist = solve_primal(system, initial, settings.solver)
    z = solve_dual(system, u, goal, method=settings.dual_method)
    ref = reference_goal(problem, goal, mesh, settings.reference_degree) if problem.exact is not None else None
    report = estimate(system, u, z, goal, reference=ref, recovery=settings.recovery)
    report.meta["newton_iterations"] = hist.iterations
    report.meta["dual_kind"] = diagram.kind
    return CycleResult(mesh, diagram, system, u, z, report, hist)
