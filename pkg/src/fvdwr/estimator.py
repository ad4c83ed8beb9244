"""Goal-oriented error estimator eta_T + eta_m + eta_nc and the nonconformity
decomposition delta_0 + delta_1 + delta_2 + delta_3 with node indicators.

All volume integrals use the system's fragment rule, so the identities
between the localized and global quantities hold up to round-off (and, for
state-dependent convection, up to the quadrature error of the divergence
theorem on each control volume).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import VORONOI, element_mean_A, h1_seminorm, lumped_norm, matrix_mu
from .errors import FieldMismatch, MissingFragments, ZeroTrueError
from .fields import FunctionField, P1Field, as_field
from .forms import (
    PointData,
    _apply_A,
    _dot,
    eval_goal,
    form_a,
    form_a_prime,
    galerkin_element_arrays,
    goal_vector,
    integrate_source,
    model_defect,
    scatter_matrix,
)
from .mesh import LOCAL_EDGES
from .quadrature import element_rule, segment_rule
from .recovery import recover_higher_order

# -- residual functionals ----------------------------------------------------------------


def primal_residual(problem, mesh, rule, u, v, per_element=False):
    """rho(u; v) = <f, v> - a(u; v) for the reduced model."""
    f = integrate_source(problem.f, mesh, rule, v, per_element)
    return f - form_a(problem.split.reduced, mesh, rule, u, v, per_element)


def dual_residual(problem, goal, mesh, rule, u, z, w, per_element=False):
    """rho*(u; z, w) = j'(u; w) - a'(u; w, z)."""
    jp = eval_goal(goal, mesh, rule, u, w, per_element)
    return jp - form_a_prime(problem.split.reduced, mesh, rule, u, w, z, per_element)


def dual_orthogonality(system, u, z, goal, rule=None):
    """(max_i |rho*(u; z, psi_i)| over interior i, scale max_i |j'(u; psi_i)|)."""
    rule = rule if rule is not None else system.rule
    _, jac = galerkin_element_arrays(system.coeffs, system.mesh, rule, u)
    J = scatter_matrix(system.mesh, jac)
    g = goal_vector(goal, system.mesh, rule, u)
    res = (g - J.T @ np.asarray(z, dtype=float))[system.dofs]
    scale = float(np.max(np.abs(g[system.dofs]))) if len(system.dofs) else 0.0
    return (float(np.max(np.abs(res))) if len(res) else 0.0), scale


def estimate_eta_T(problem, goal, mesh, rule, u, z, u_plus, z_plus):
    """eta_T = 1/2 [rho(u; z+ - z) + rho*(u; z, u+ - u)] and its element partials."""
    u_f, z_f = as_field(u), as_field(z)
    rho = primal_residual(problem, mesh, rule, u_f, as_field(z_plus) - z_f, per_element=True)
    rho_s = dual_residual(problem, goal, mesh, rule, u_f, z_f, as_field(u_plus) - u_f, per_element=True)
    local = 0.5 * (rho + rho_s)
    return float(np.sum(local)), local


def estimate_eta_m(split, mesh, rule, u, z):
    """eta_m = -a_delta(u; z) and its element partials."""
    local = -np.asarray(model_defect(split, mesh, rule, u, z, per_element=True))
    return float(np.sum(local)), local


def estimate_eta_nc_identity(system, u, z):
    """eta_nc = <f, z> - <f_T, z> - a(u; z) + a_T(u; z), globally and per element.

    Returns (global value, element terms, unlocalized value).
    """
    mesh, rule = system.mesh, system.rule
    f_loc = integrate_source(system.problem.f, mesh, rule, z, per_element=True)
    a_loc = form_a(system.coeffs, mesh, rule, u, z, per_element=True)
    local = f_loc - system.local_load(z) - a_loc + system.local_form(u, z)
    direct = (
        float(np.sum(f_loc))
        - float(np.dot(system.load(), z))
        - float(np.sum(a_loc))
        + system.form(u, z)
    )
    return float(np.sum(local)), local, direct


# -- nonconformity decomposition -----------------------------------------------------------


@dataclass
class NCDecomposition:
    delta: np.ndarray  # (4,)
    eta: np.ndarray  # (4,)
    node: np.ndarray  # (N, 4) node indicators eta_{0i} .. eta_{3i}
    delta_node: np.ndarray  # (N, 4) per-node parts of delta_0 .. delta_3
    z_h1_patch: np.ndarray  # (N,) |z|_{1,2,Omega_i}
    delta0_direct: float = 0.0


def _segment_points(diagram, nseg):
    s, ws = segment_rule(nseg)
    sb = diagram.segment_barycentric
    bary = sb[:, :, 0, None, :] * (1.0 - s)[None, None, :, None] + sb[:, :, 1, None, :] * s[None, None, :, None]
    return bary, ws


def compute_nc_indicators(system, u, z, nseg=3):
    """delta_0..delta_3 and node indicators eta_{0i}..eta_{3i}."""
    if system.mode != "fv":
        raise ValueError("the nonconformity decomposition needs a finite-volume system")
    diagram = system.diagram
    mesh = system.mesh
    rule = system.rule
    if not rule.has_fragments:
        raise MissingFragments("the volume rule carries no fragment ownership")
    coeffs = system.coeffs
    u = np.asarray(u, dtype=float)
    z = np.asarray(z, dtype=float)
    if u.shape != (mesh.n_vertices,) or z.shape != (mesh.n_vertices,):
        raise FieldMismatch("u and z must be nodal fields on the system mesh")
    n = mesh.n_vertices
    el = mesh.elements
    edges = mesh.edges
    ee = mesh.element_edges
    interior = np.zeros(n, dtype=bool)
    interior[mesh.interior] = True
    ec = system.edge_coefficients(u)
    d = diagram.d_ij
    m = diagram.m_ij
    Du = u[edges[:, 0]] - u[edges[:, 1]]
    Dz = z[edges[:, 0]] - z[edges[:, 1]]
    node = np.zeros((n, 4))
    dnode = np.zeros((n, 4))

    # delta_0: mu_ij versus the flux weight of the element-mean coefficient
    pd = PointData(mesh, rule, u)
    cf = pd.coefficients(coeffs)
    _, gz = P1Field(z).evaluate(mesh, rule.bary)
    a0_cont = np.sum(rule.weights * _dot(_apply_A(cf["A"], pd.gw, coeffs.matrix), gz))
    if diagram.kind == VORONOI:
        A_T, _ = element_mean_A(coeffs, mesh, rule, u)
        mu_T, _ = matrix_mu(diagram, A_T)
        pos = m > 0
        k = np.where(pos, m / d, 0.0)
        a0_fv = float(np.sum(ec.mu * Du * Dz * k))
        delta0_direct = a0_fv - float(a0_cont)
        dmu = ec.mu - mu_T
        e0 = dmu * Du * Dz * k
        sq = dmu**2 * Du**2 * k
        for s in range(2):
            np.add.at(dnode[:, 0], edges[:, s], 0.5 * e0)
            np.add.at(node[:, 0], edges[:, s], 0.25 * sq)
        node[:, 0] = np.sqrt(node[:, 0])
    else:
        delta0_direct = 0.0

    # delta_1: g (z - z_i) on the fragments of Omega_i
    owner_global = el[:, rule.owner]  # (M, Q)
    g = system.problem.f(pd.x, pd.y) - _dot(cf["b"], pd.gw) - cf["c"] * pd.w
    zq, _ = P1Field(z).evaluate(mesh, rule.bary)
    d1 = rule.weights * g * (zq - z[owner_global])
    dnode[:, 1] = np.bincount(owner_global.ravel(), weights=d1.ravel(), minlength=n)
    h2 = mesh.diameters[:, None] ** 2
    node[:, 1] = np.sqrt(np.bincount(owner_global.ravel(), weights=(h2 * rule.weights * g * g).ravel(), minlength=n))

    # delta_2: theta_i = int_{Omega_i} [f - f_i + (div b - c) u + c_i u_i] - u_i sum_j gamma_ij m_ij
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    f_i = np.asarray(system.problem.f(x, y), dtype=float)
    c_i = np.asarray(coeffs.c(x, y, u), dtype=float)
    divb = cf["div_b"] + _dot(cf["db"], pd.gw)
    integrand = system.problem.f(pd.x, pd.y) + (divb - cf["c"]) * pd.w
    theta = np.bincount(owner_global.ravel(), weights=(rule.weights * integrand).ravel(), minlength=n)
    theta += (c_i * u - f_i) * diagram.m_i
    if not system.div_free:
        gm = ec.gamma * m
        out = np.bincount(edges[:, 0], weights=gm, minlength=n) - np.bincount(edges[:, 1], weights=gm, minlength=n)
        theta -= u * out
    dnode[:, 2] = np.where(interior, z * theta, 0.0)
    node[:, 2] = np.where(interior, np.abs(theta) / np.sqrt(diagram.m_i), 0.0)

    # delta_3: zeta_ij on the interface pieces, symmetrized with (z_i - z_j)
    sbary, ws = _segment_points(diagram, nseg)
    spts = np.einsum("tkqa,tad->tkqd", sbary, mesh.vertices[el])
    uq = np.einsum("tkqa,ta->tkq", sbary, u[el])
    bq = coeffs.b(spts[..., 0], spts[..., 1], uq)
    nrm = diagram.normal_T * diagram.edge_sign[..., None]  # oriented edges[:,0] -> edges[:,1]
    flux_u = diagram.m_ij_T * np.einsum("q,tkqd,tkd,tkq->tk", ws, bq, nrm, uq)
    P = ec.r * u[edges[:, 0]] + (1.0 - ec.r) * u[edges[:, 1]]
    zeta = (P * ec.gamma)[ee] * diagram.m_ij_T - flux_u  # (M, 3) integral of zeta over Gamma_ij^T
    contrib = zeta * Dz[ee]
    i0, i1 = edges[ee, 0], edges[ee, 1]
    np.add.at(dnode[:, 3], i0.ravel(), 0.5 * contrib.ravel())
    np.add.at(dnode[:, 3], i1.ravel(), 0.5 * contrib.ravel())
    frag = diagram.fragment_areas.reshape(-1, 3, 2)  # (M, edge k, side s)
    dT = d[ee]
    live = diagram.m_ij_T > 0
    sq3 = np.zeros(n)
    for s in range(2):
        area = frag[:, :, s]
        ok = live & (area > 0)
        val = np.where(ok, 0.25 * dT**2 / np.where(ok, area, 1.0) * zeta**2, 0.0)
        own = el[:, LOCAL_EDGES[:, s]]  # (M, 3) owner of side s of edge k
        np.add.at(sq3, own.ravel(), val.ravel())
    node[:, 3] = np.sqrt(sq3)

    delta = dnode.sum(axis=0)
    if diagram.kind != VORONOI:
        delta[0] = 0.0
    eta = np.sqrt(np.sum(node**2, axis=0))

    # |z|_{1,2,Omega_i} from fragment areas
    gzT = np.einsum("tkd,tk->td", mesh.basis_gradients, z[el])
    gz2 = np.sum(gzT**2, axis=1)
    frag_owner = el[:, diagram.FRAGMENT_OWNER]  # (M, 6)
    zpatch = np.sqrt(np.bincount(frag_owner.ravel(), weights=(diagram.fragment_areas * gz2[:, None]).ravel(),
                                 minlength=n))
    return NCDecomposition(delta, eta, node, dnode, zpatch, delta0_direct)


# -- report ------------------------------------------------------------------------------------


@dataclass
class ErrorReport:
    eta_T: float
    eta_m: float
    eta_nc: float
    eta_nc_direct: float
    delta: np.ndarray
    eta_l: np.ndarray
    node_indicators: np.ndarray  # (N, 4)
    element_eta_T: np.ndarray
    element_eta_m: np.ndarray
    element_eta_nc: np.ndarray  # localized identity terms
    element_nc_share: np.ndarray  # redistributed node bounds
    element_indicators: np.ndarray
    goal_value: float
    z_h1: float
    z_lumped: float
    dual_orthogonality: tuple = (0.0, 0.0)
    reference: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def total_estimate(self) -> float:
        return self.eta_T + self.eta_m + self.eta_nc

    @property
    def sum_eta_l(self) -> float:
        return float(np.sum(self.eta_l))

    @property
    def true_error(self):
        return None if self.reference is None else self.reference - self.goal_value

    @property
    def effectivity(self):
        if self.reference is None:
            return None
        try:
            return effectivity(self, self.reference)
        except ZeroTrueError:
            return None


def effectivity(report, reference_goal: float) -> float:
    den = reference_goal - report.goal_value
    if abs(den) < 1e-14:
        raise ZeroTrueError(f"reference equals computed goal value (difference {den:.3e})")
    return report.total_estimate / den


def redistribute(diagram, node_values):
    """Split node values among incident elements proportionally to m_i^T / m_i."""
    mesh = diagram.mesh
    share = diagram.m_i_T / diagram.m_i[mesh.elements]
    return np.sum(share * np.asarray(node_values)[mesh.elements], axis=1)


def reference_goal(problem, goal, mesh, degree=12):
    """j(u) of the manufactured solution by high-degree quadrature on ``mesh``."""
    if problem.exact is None:
        raise ValueError(f"problem {problem.name} has no exact solution")
    rule = element_rule(mesh, degree)
    return eval_goal(goal, mesh, rule, FunctionField(problem.exact, problem.exact_gradient))


def estimate(system, u, z, goal, *, u_plus=None, z_plus=None, reference=None, recovery="p2"):
    """Assemble the full ErrorReport for a primal/dual pair on ``system``.

    ``u_plus``/``z_plus`` override the recovered fields (e.g. exact
    solutions); otherwise patch recovery with ``recovery`` in {"p2", "patch"}.
    """
    mesh, rule, problem = system.mesh, system.rule, system.problem
    u = np.asarray(u, dtype=float)
    z = np.asarray(z, dtype=float)
    if u_plus is None:
        ru = recover_higher_order(u, mesh)
        u_plus = ru.as_p2(dirichlet=True) if recovery == "p2" else ru
    if z_plus is None:
        rz = recover_higher_order(z, mesh)
        z_plus = rz.as_p2(dirichlet=True) if recovery == "p2" else rz
    eta_T, loc_T = estimate_eta_T(problem, goal, mesh, rule, u, z, u_plus, z_plus)
    eta_m, loc_m = estimate_eta_m(problem.split, mesh, rule, u, z)
    eta_nc, loc_nc, eta_nc_direct = estimate_eta_nc_identity(system, u, z)
    if system.mode == "fv":
        dec = compute_nc_indicators(system, u, z)
        delta, eta_l, node = dec.delta, dec.eta, dec.node
        zpatch = dec.z_h1_patch
        share_node = (node[:, 0] + node[:, 1] + node[:, 3]) * zpatch + node[:, 2] * np.abs(z) * np.sqrt(
            system.diagram.m_i
        )
        nc_share = redistribute(system.diagram, share_node)
    else:
        delta = np.zeros(4)
        eta_l = np.zeros(4)
        node = np.zeros((mesh.n_vertices, 4))
        nc_share = np.zeros(mesh.n_elements)
    elem = np.abs(loc_T) + np.abs(loc_m) + nc_share
    return ErrorReport(
        eta_T=eta_T,
        eta_m=eta_m,
        eta_nc=eta_nc,
        eta_nc_direct=eta_nc_direct,
        delta=delta,
        eta_l=eta_l,
        node_indicators=node,
        element_eta_T=loc_T,
        element_eta_m=loc_m,
        element_eta_nc=loc_nc,
        element_nc_share=nc_share,
        element_indicators=elem,
        goal_value=eval_goal(goal, mesh, rule, u),
        z_h1=h1_seminorm(mesh, z),
        z_lumped=lumped_norm(system.diagram, z),
        dual_orthogonality=dual_orthogonality(system, u, z, goal),
        reference=reference,
    )


__all__ = [
    "primal_residual",
    "dual_residual",
    "dual_orthogonality",
    "estimate_eta_T",
    "estimate_eta_m",
    "estimate_eta_nc_identity",
    "compute_nc_indicators",
    "NCDecomposition",
    "ErrorReport",
    "effectivity",
    "redistribute",
    "reference_goal",
    "estimate",
]
