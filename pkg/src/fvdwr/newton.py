"""Damped Newton iteration with Armijo backtracking and a checked sparse direct solve."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import LineSearchStall, MaxIterations, SingularJacobian

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    atol: float = 1e-10
    rtol: float = 1e-12
    max_iter: int = 50
    damping: bool = True
    max_halvings: int = 20
    armijo: float = 1e-4


@dataclass
class ConvergenceLog:
    residual_norms: list = field(default_factory=list)
    step_lengths: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.step_lengths)


def solve_linear(A, b, iteration=0):
    """Sparse LU solve; raises SingularJacobian on failure or a bad residual."""
    b = np.asarray(b, dtype=float)
    if A.shape[0] == 0:
        return np.zeros(0)
    try:
        with np.errstate(all="ignore"):
            lu = spla.splu(sp.csc_matrix(A))
            x = lu.solve(b)
    except RuntimeError as exc:
        raise SingularJacobian(iteration, f"factorization failed at iteration {iteration}: {exc}") from None
    if not np.all(np.isfinite(x)):
        raise SingularJacobian(iteration)
    res = np.max(np.abs(A @ x - b)) if len(b) else 0.0
    if res > 1e-9 * (1.0 + np.max(np.abs(b))):
        raise SingularJacobian(iteration, f"linear residual {res:.3e} too large at iteration {iteration}")
    return x


def solve_primal(system, initial=None, opts: SolverOptions | None = None):
    """Solve system.residual(x) = 0 for the interior unknowns.

    Returns the full nodal field (boundary zeros) and a ConvergenceLog.
    """
    opts = opts or SolverOptions()
    x = np.zeros(system.n_dofs) if initial is None else system.restrict(initial).copy()
    F = system.residual(x)
    nrm = float(np.max(np.abs(F))) if len(F) else 0.0
    hist = ConvergenceLog([nrm])
    r0 = nrm
    for it in range(opts.max_iter + 1):
        if nrm <= opts.atol or (it > 0 and nrm <= opts.rtol * r0):
            hist.converged = True
            return system.expand(x), hist
        if it == opts.max_iter:
            break
        J = system.jacobian(x)
        dx = solve_linear(J, -F, it)
        t = 1.0
        phi0 = float(F @ F)
        for _ in range(opts.max_halvings + 1):
            xn = x + t * dx
            Fn = system.residual(xn)
            phin = float(Fn @ Fn)
            if not opts.damping or phin <= (1.0 - 2.0 * opts.armijo * t) * phi0:
                break
            t *= 0.5
        else:
            raise LineSearchStall(f"no sufficient decrease after {opts.max_halvings} halvings at iteration {it}")
        x, F = xn, Fn
        nrm = float(np.max(np.abs(F)))
        hist.residual_norms.append(nrm)
        hist.step_lengths.append(t)
        log.debug("newton %d: |F| = %.3e, step %.3g", it + 1, nrm, t)
    raise MaxIterations(f"no convergence in {opts.max_iter} iterations (|F| = {nrm:.3e})")
