import numpy as np
import pytest

from fvdwr.assembly import (
    DiscreteSystem,
    element_mean_A,
    h1_seminorm,
    l2_norm,
    lumped_norm,
    matrix_mu,
    v_seminorm,
)
from fvdwr.dual import build_dual_diagram
from fvdwr.fields import interpolate
from fvdwr.mesh import unit_square_mesh
from fvdwr.problems import Problem, ModelSplit, constant_coefficients, p1_poisson, p2_convdiff, p3_quasilinear
from fvdwr.quadrature import element_rule
from fvdwr.schemes import UpwindScheme


def _system(problem, kind="voronoi", n=8, **kw):
    return DiscreteSystem(problem, build_dual_diagram(unit_square_mesh(n), kind), kw.pop("scheme", UpwindScheme()), **kw)


def test_poisson_row_is_five_point_stencil():
    s = _system(p1_poisson(), n=4)
    J = s.jacobian(np.zeros(s.n_dofs)).toarray()
    center = 4  # interior unknown at (0.5, 0.5)
    assert s.mesh.vertices[s.dofs[center]] == pytest.approx([0.5, 0.5])
    row = J[center]
    assert row[center] == pytest.approx(4.0, abs=1e-12)
    assert sorted(np.round(row[row != 0], 12)) == [-1.0] * 4 + [4.0]
    f = s.load()[s.dofs[center]]
    assert f == pytest.approx(2 * np.pi**2 * np.sin(np.pi / 2) ** 2 / 16, abs=1e-12)


def test_donald_poisson_matches_p1_stiffness():
    # on Donald diagrams the diffusion part is the conforming stiffness matrix
    s = _system(p1_poisson(), kind="donald", n=4)
    J = s.jacobian(np.zeros(s.n_dofs)).toarray()
    assert np.allclose(J, J.T)
    assert np.allclose(np.diag(J), 4.0)


def test_matrix_mu_identity_is_one():
    mesh = unit_square_mesh(4)
    d = build_dual_diagram(mesh, "voronoi")
    A_T = np.broadcast_to(np.eye(2), (mesh.n_elements, 2, 2))
    mu, _ = matrix_mu(d, A_T)
    assert np.allclose(mu[d.m_ij > 0], 1.0)


def test_matrix_coefficient_equals_scalar_for_isotropic():
    base = p2_convdiff(eps=0.3)
    mat = constant_coefficients(0.3 * np.eye(2), b=(1.0, 0.0), name="matrix")
    p_mat = Problem("m", ModelSplit(mat), base.f, base.exact, base.exact_gradient, div_free=True)
    s1, s2 = _system(base), _system(p_mat)
    x = s1.restrict(interpolate(s1.mesh, base.exact))
    assert np.allclose(s1.residual(x), s2.residual(x), atol=1e-13)


def test_element_mean_A_constant():
    mesh = unit_square_mesh(2)
    c = constant_coefficients(2.5)
    A, dA = element_mean_A(c, mesh, element_rule(mesh), np.zeros(mesh.n_vertices))
    assert np.allclose(A, 2.5 * np.eye(2))
    assert np.allclose(dA, 0.0)


@pytest.mark.parametrize("kind", ["voronoi", "donald"])
@pytest.mark.parametrize("div_free", [True, False])
@pytest.mark.parametrize("scheme", ["exponential", "samarskij", "piecewise_linear"])
def test_jacobian_against_finite_differences(kind, div_free, scheme):
    problem = p3_quasilinear(bx=2.0, by=-1.0)
    s = _system(problem, kind, n=6, scheme=UpwindScheme(scheme), div_free=div_free)
    rng = np.random.default_rng(0)
    x = 0.5 * rng.standard_normal(s.n_dofs)
    J = s.jacobian(x).toarray()
    Jfd = s.jacobian_fd(x)
    assert np.max(np.abs(J - Jfd)) <= 1e-5 * np.max(np.abs(J))


def test_galerkin_mode_jacobian():
    s = _system(p3_quasilinear(), mode="galerkin", n=6)
    x = 0.3 * np.ones(s.n_dofs)
    assert np.max(np.abs(s.jacobian(x).toarray() - s.jacobian_fd(x))) <= 1e-5 * np.abs(s.jacobian(x)).max()


def test_constant_state_flux_balance():
    # pure diffusion + div-free convection annihilates constants on interior rows away from the boundary
    s = _system(p2_convdiff(eps=1.0), n=8)
    w = np.ones(s.mesh.n_vertices)
    op = s.operator(w)
    far = [i for i in s.dofs if np.all(np.abs(s.mesh.vertices[i] - 0.5) < 0.3)]
    assert np.allclose(op[far], 0.0, atol=1e-13)


def test_local_form_sums_to_global():
    s = _system(p3_quasilinear(), "donald", n=6)
    rng = np.random.default_rng(1)
    w = rng.standard_normal(s.mesh.n_vertices) * 0.3
    v = np.zeros(s.mesh.n_vertices)
    v[s.dofs] = rng.standard_normal(s.n_dofs)
    assert np.sum(s.local_form(w, v)) == pytest.approx(s.form(w, v), rel=1e-12)
    assert np.sum(s.local_load(v)) == pytest.approx(np.dot(s.load(), v), rel=1e-12)


def test_unknown_mode():
    with pytest.raises(ValueError):
        _system(p1_poisson(), mode="dg")


def test_norms_of_known_fields():
    mesh = unit_square_mesh(8)
    d = build_dual_diagram(mesh, "voronoi")
    x = mesh.vertices[:, 0]
    assert h1_seminorm(mesh, x) == pytest.approx(1.0)
    assert l2_norm(mesh, np.ones(mesh.n_vertices)) == pytest.approx(1.0)
    assert lumped_norm(d, np.ones(mesh.n_vertices)) == pytest.approx(1.0)
    assert v_seminorm(d, np.zeros(mesh.n_vertices)) == 0.0
    # on this mesh the Voronoi Laplacian is the P1 stiffness matrix
    u = interpolate(mesh, lambda a, b: np.sin(np.pi * a) * np.sin(np.pi * b))
    assert v_seminorm(d, u) == pytest.approx(h1_seminorm(mesh, u), rel=1e-12)
