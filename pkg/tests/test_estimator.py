import math

import numpy as np
import pytest

from fvdwr.assembly import DiscreteSystem, h1_seminorm, lumped_norm
from fvdwr.dual import build_dual_diagram
from fvdwr.errors import ZeroTrueError
from fvdwr.estimator import (
    compute_nc_indicators,
    dual_orthogonality,
    effectivity,
    estimate,
    estimate_eta_m,
    estimate_eta_nc_identity,
    redistribute,
)
from fvdwr.fields import FunctionField
from fvdwr.mesh import unit_square_mesh
from fvdwr.newton import solve_primal
from fvdwr.pipeline import RunSettings, solve_and_estimate
from fvdwr.problems import get_goal, p1_poisson, p2_convdiff, p3_quasilinear
from fvdwr.quadrature import element_rule
from fvdwr.recovery import solve_dual
from fvdwr.schemes import UpwindScheme


def _pair(problem, kind="voronoi", n=8, goal="mean_value", scheme=None):
    mesh = unit_square_mesh(n)
    s = DiscreteSystem(problem, build_dual_diagram(mesh, kind), scheme or UpwindScheme())
    u, _ = solve_primal(s)
    z = solve_dual(s, u, get_goal(goal))
    return s, u, z


@pytest.mark.parametrize("kind", ["voronoi", "donald"])
@pytest.mark.parametrize("scheme", ["exponential", "full_upwind", "tanh"])
def test_decomposition_identity(kind, scheme):
    s, u, z = _pair(p3_quasilinear(bx=3.0, by=1.0), kind, scheme=UpwindScheme(scheme))
    dec = compute_nc_indicators(s, u, z)
    eta_nc, local, direct = estimate_eta_nc_identity(s, u, z)
    assert eta_nc == pytest.approx(direct, rel=1e-10)
    assert dec.delta.sum() == pytest.approx(eta_nc, rel=1e-8)
    assert dec.delta[0] == pytest.approx(dec.delta0_direct, rel=1e-8, abs=1e-14)
    assert local.shape == (s.mesh.n_elements,)


def test_node_indicators_sum_to_deltas():
    s, u, z = _pair(p2_convdiff(eps=0.1), "voronoi")
    dec = compute_nc_indicators(s, u, z)
    assert np.allclose(dec.delta_node.sum(axis=0), dec.delta, rtol=1e-10, atol=1e-14)
    assert np.all(dec.node >= 0)


def test_donald_has_no_delta0():
    s, u, z = _pair(p3_quasilinear(), "donald")
    dec = compute_nc_indicators(s, u, z)
    assert dec.delta[0] == 0.0
    assert np.all(dec.node[:, 0] == 0.0)


def test_constant_diffusion_has_no_eta0():
    s, u, z = _pair(p2_convdiff(eps=0.5), "voronoi")
    assert compute_nc_indicators(s, u, z).eta[0] <= 1e-12


@pytest.mark.parametrize("kind", ["voronoi", "donald"])
def test_bound_chain(kind):
    s, u, z = _pair(p3_quasilinear(), kind, n=12)
    dec = compute_nc_indicators(s, u, z)
    zh1, zl = h1_seminorm(s.mesh, z), lumped_norm(s.diagram, z)
    assert abs(dec.delta[1]) <= dec.eta[1] * zh1 + 1e-10
    assert abs(dec.delta[2]) <= dec.eta[2] * zl + 1e-10
    assert abs(dec.delta[3]) <= dec.eta[3] * zh1 + 1e-10
    # sanity ceiling for the mesh-dependent constant of the delta_0 bound
    assert abs(dec.delta[0]) <= 10 * dec.eta[0] * zh1 + 1e-12


def test_dual_orthogonality_galerkin():
    s, u, z = _pair(p3_quasilinear(), "donald")
    res, scale = dual_orthogonality(s, u, z, get_goal("mean_value"))
    assert res <= 1e-9 * scale


def test_decomposition_requires_fv():
    mesh = unit_square_mesh(4)
    s = DiscreteSystem(p1_poisson(), build_dual_diagram(mesh, "voronoi"), UpwindScheme(), mode="galerkin")
    with pytest.raises(ValueError):
        compute_nc_indicators(s, np.zeros(mesh.n_vertices), np.zeros(mesh.n_vertices))


def test_identity_regime_effectivity_is_one():
    problem = p1_poisson()
    goal = get_goal("weighted_mean", weight="sine")
    mesh = unit_square_mesh(6)
    s = DiscreteSystem(problem, build_dual_diagram(mesh, "donald"), UpwindScheme(), mode="galerkin",
                       rule=element_rule(mesh, 12))
    u, _ = solve_primal(s)
    z = solve_dual(s, u, goal)
    exact = FunctionField(problem.exact, problem.exact_gradient)
    rep = estimate(s, u, z, goal, u_plus=exact, z_plus=exact, reference=math.pi**2 / 2)
    assert rep.eta_nc == pytest.approx(0.0, abs=1e-12)
    assert rep.effectivity == pytest.approx(1.0, abs=1e-8)


def test_linear_problem_estimator_has_no_remainder_term():
    # for linear data eta_T is exactly the symmetric residual average; no extra term
    s, u, z = _pair(p2_convdiff(eps=1.0))
    rep = estimate(s, u, z, get_goal("mean_value"))
    assert rep.total_estimate == pytest.approx(rep.eta_T + rep.eta_m + rep.eta_nc, rel=0, abs=0)
    assert rep.eta_m == 0.0


def test_model_error_for_frozen_exponent():
    s, u, z = _pair(p3_quasilinear(gamma1=0.5))
    eta_m, loc = estimate_eta_m(s.problem.split, s.mesh, s.rule, u, z)
    assert eta_m != 0.0 and loc.sum() == pytest.approx(eta_m)
    s0, u0, z0 = _pair(p3_quasilinear(gamma1=0.0))
    assert estimate_eta_m(s0.problem.split, s0.mesh, s0.rule, u0, z0)[0] == 0.0


def test_element_indicators_are_consistent():
    res = solve_and_estimate(p3_quasilinear(), get_goal("mean_value"), unit_square_mesh(8), RunSettings())
    rep = res.report
    assert np.all(rep.element_indicators >= 0)
    expected = np.abs(rep.element_eta_T) + np.abs(rep.element_eta_m) + rep.element_nc_share
    assert np.allclose(rep.element_indicators, expected)
    assert rep.element_eta_T.sum() == pytest.approx(rep.eta_T)


def test_redistribute_preserves_sums():
    d = build_dual_diagram(unit_square_mesh(5), "voronoi")
    node = np.random.default_rng(2).random(d.mesh.n_vertices)
    assert redistribute(d, node).sum() == pytest.approx(node.sum())


def test_effectivity_undefined_for_zero_error():
    res = solve_and_estimate(p1_poisson(), get_goal("mean_value"), unit_square_mesh(4), RunSettings())
    with pytest.raises(ZeroTrueError):
        effectivity(res.report, res.report.goal_value)


@pytest.mark.parametrize("n", [16, 32])
def test_effectivity_near_one_for_poisson(n):
    res = solve_and_estimate(p1_poisson(), get_goal("mean_value"), unit_square_mesh(n), RunSettings())
    assert 0.5 <= res.report.effectivity <= 2.0
