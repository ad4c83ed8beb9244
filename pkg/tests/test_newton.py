import numpy as np
import pytest
import scipy.sparse as sp

from fvdwr.assembly import DiscreteSystem
from fvdwr.dual import build_dual_diagram
from fvdwr.errors import LineSearchStall, MaxIterations, SingularJacobian
from fvdwr.mesh import unit_square_mesh
from fvdwr.newton import SolverOptions, solve_linear, solve_primal
from fvdwr.problems import p1_poisson, p2_convdiff, p3_quasilinear
from fvdwr.schemes import UpwindScheme


def _system(problem, n=8, kind="voronoi"):
    return DiscreteSystem(problem, build_dual_diagram(unit_square_mesh(n), kind), UpwindScheme())


@pytest.mark.parametrize("problem", [p1_poisson(), p2_convdiff(eps=0.01), p3_quasilinear(w0=0.2)])
def test_linear_problems_take_one_step(problem):
    u, log = solve_primal(_system(problem))
    assert log.converged and log.iterations == 1
    assert log.step_lengths == [1.0]


def test_quasilinear_quadratic_tail():
    u, log = solve_primal(_system(p3_quasilinear(), n=16))
    r = log.residual_norms
    assert log.converged and r[-1] <= 1e-10 and log.iterations <= 15
    # superlinear tail: r_{k+1} <= C r_k^1.5 once the iterates are close
    tail = [x for x in r if x < 1e-2]
    if len(tail) >= 3:
        assert tail[-1] <= 10 * tail[-2] ** 1.5


def test_solution_has_boundary_zeros():
    s = _system(p3_quasilinear())
    u, _ = solve_primal(s)
    assert np.all(u[s.mesh.boundary] == 0.0)


def test_warm_start_from_solution_needs_no_step():
    s = _system(p3_quasilinear())
    u, _ = solve_primal(s)
    _, log = solve_primal(s, initial=u)
    assert log.iterations == 0 and log.converged


def test_max_iterations():
    with pytest.raises(MaxIterations):
        solve_primal(_system(p3_quasilinear()), opts=SolverOptions(max_iter=1, atol=1e-14, rtol=0.0))


def test_singular_matrix():
    A = sp.csc_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularJacobian) as info:
        solve_linear(A, np.array([1.0, 0.0]), iteration=3)
    assert info.value.iteration == 3


class _Stalling:
    """F(x) = x^2 + 1 has no root; the line search cannot decrease |F| enough."""

    n_dofs = 1

    def restrict(self, w):
        return np.asarray(w, dtype=float)

    def expand(self, x):
        return x

    def residual(self, x):
        return x * x + 1.0

    def jacobian(self, x):
        return sp.csc_matrix([[2.0 * x[0] if x[0] != 0 else 1e-3]])


def test_line_search_stall():
    with pytest.raises(LineSearchStall):
        solve_primal(_Stalling(), initial=np.array([0.0]), opts=SolverOptions(max_halvings=5))
