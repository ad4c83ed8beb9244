"""Doerfler marking and the solve-estimate-mark-refine loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dual import DONALD, VORONOI
from .errors import VoronoiInvalidated
from .mesh import prolongate, refine_with_parents, validate_primary_mesh
from .pipeline import RunSettings, solve_and_estimate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MarkResult:
    elements: frozenset
    all_zero: bool = False

    def __iter__(self):
        return iter(sorted(self.elements))

    def __len__(self):
        return len(self.elements)


def mark_elements(indicators, theta: float = 0.5) -> MarkResult:
    """Smallest greedy set S with sum over S >= theta * total (ties by element index)."""
    eta = np.asarray(indicators, dtype=float)
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    if np.any(eta < 0) or not np.all(np.isfinite(eta)):
        raise ValueError("indicators must be finite and nonnegative")
    total = float(eta.sum())
    if total == 0.0:
        return MarkResult(frozenset(), all_zero=True)
    order = np.lexsort((np.arange(len(eta)), -eta))
    csum = np.cumsum(eta[order])
    # relative slack guards against the cumulative sum rounding just below the target
    k = int(np.searchsorted(csum, theta * total * (1.0 - 1e-12), side="left")) + 1
    chosen = order[: min(k, len(eta))]
    return MarkResult(frozenset(int(t) for t in chosen if eta[t] > 0))


@dataclass(frozen=True)
class AdaptiveOptions:
    max_cycles: int = 5
    tol: float = 0.0
    theta: float = 0.5
    fallback: str = "donald"  # or "stop"


@dataclass
class AdaptiveRun:
    cycles: list = field(default_factory=list)
    status: str = "max_cycles"


def run_adaptive_loop(problem, goal, mesh, settings: RunSettings, opts: AdaptiveOptions | None = None) -> AdaptiveRun:
    opts = opts or AdaptiveOptions()
    run = AdaptiveRun()
    current = settings
    initial = None
    for cycle in range(max(opts.max_cycles, 1)):
        if current.dual_kind == VORONOI:
            rep = validate_primary_mesh(mesh, VORONOI)
            if not rep.ok:
                if opts.fallback == "stop":
                    run.status = "voronoi_invalidated"
                    if not run.cycles:
                        raise VoronoiInvalidated(
                            f"mesh is not a self-centered Delaunay mesh (element {rep.offending_element})"
                        )
                    return run
                log.warning("cycle %d: Voronoi diagram invalid, switching to Donald", cycle)
                current = replace(current, dual_kind=DONALD)
        res = solve_and_estimate(problem, goal, mesh, current, initial=initial)
        res.report.meta["cycle"] = cycle
        run.cycles.append(res)
        est = abs(res.report.total_estimate)
        if est <= opts.tol or math.isinf(opts.tol):
            run.status = "converged"
            return run
        if cycle == opts.max_cycles - 1:
            break
        marked = mark_elements(res.report.element_indicators, opts.theta)
        if marked.all_zero or not len(marked):
            run.status = "all_zero_indicators"
            return run
        mesh, parents = refine_with_parents(mesh, marked)
        initial = prolongate(res.u, parents)
    run.status = "max_cycles"
    return run
