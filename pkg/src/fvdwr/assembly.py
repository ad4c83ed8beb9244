"""Finite-volume operator, its Jacobian and the lumped load.

Edge arrays follow ``mesh.edges`` with orientation i < j.  For an edge with
difference D = w_i - w_j, the flux entering row i and row j (per unit
interface length) is

    standard:       g_i = mu D / d - (1 - r) gamma D,   g_j = -mu D / d - r gamma D
    div-free:       g_i = mu D / d + P gamma,          g_j = -mu D / d - P gamma

with P = r w_i + (1 - r) w_j, r = r(gamma d / mu), gamma oriented i -> j.
On Donald diagrams the diffusion part is replaced by the P1 stiffness term
(A(w) grad w, grad psi_i) and mu only enters r.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .dual import DONALD, VORONOI
from .fields import as_field
from .forms import (
    PointData,
    form_a,
    galerkin_element_arrays,
    integrate_source,
    load_vector,
    scatter_matrix,
    scatter_vector,
)
from .mesh import LOCAL_EDGES
from .quadrature import fragment_rule, segment_rule

FV = "fv"
GALERKIN = "galerkin"


@dataclass(frozen=True, eq=False)
class EdgeCoefficients:
    """Per-edge mu, gamma (i -> j) and r = r(gamma d / mu) with state derivatives.

    ``slots`` (E, 4) lists the vertices [i, j, o1, o2] the coefficients can
    depend on (o = opposite vertices of the adjacent elements, -1 if absent);
    ``dmu``, ``dgamma`` and ``dr`` hold the partial derivatives per slot.
    """

    mu: np.ndarray
    gamma: np.ndarray
    r: np.ndarray
    z: np.ndarray
    slots: np.ndarray
    dmu: np.ndarray
    dgamma: np.ndarray
    dr: np.ndarray

    def r_ordered(self, forward: bool):
        """r_ij for i -> j when ``forward``, else r_ji = 1 - r_ij."""
        return self.r if forward else 1.0 - self.r


def edge_slots(mesh):
    edges = mesh.edges
    ee = mesh.edge_elements
    slots = np.full((len(edges), 4), -1, dtype=np.int64)
    slots[:, :2] = edges
    for s in range(2):
        t = ee[:, s]
        has = t >= 0
        tri = mesh.elements[t[has]]
        slots[has, 2 + s] = tri.sum(axis=1) - edges[has, 0] - edges[has, 1]
    return slots


def element_mean_A(coeffs, mesh, rule, w):
    """Element mean of A(x, w) as (M, 2, 2) plus derivatives w.r.t. the three vertex values."""
    pd = PointData(mesh, rule, w)
    A = coeffs.A(pd.x, pd.y, pd.w)
    dA = coeffs.dA(pd.x, pd.y, pd.w)
    if not coeffs.matrix:
        eye = np.eye(2)
        A = A[..., None, None] * eye
        dA = dA[..., None, None] * eye
    area = rule.weights.sum(axis=1)
    mean = np.einsum("tq,tqab->tab", rule.weights, A) / area[:, None, None]
    dmean = np.einsum("tq,tqk,tqab->tkab", rule.weights, rule.bary, dA) / area[:, None, None, None]
    return mean, dmean


def _segment_outward(diagram):
    """(M, 3 vertex, 3 edge) factor: +-1 where the piece of local edge k bounds Omega_a, else 0."""
    out = np.zeros((3, 3))
    for k, (a, b) in enumerate(LOCAL_EDGES):
        out[a, k] = 1.0
        out[b, k] = -1.0
    return out


def matrix_mu(diagram, A_T, dA_T=None):
    """mu_ij = d_ij / m_ij * flux of (A_T grad psi_j) out of Omega_i, from segment geometry.

    Returns mu (E,) and, if ``dA_T`` is given, dmu (E, 4) over ``edge_slots``.
    """
    mesh = diagram.mesh
    g = mesh.basis_gradients
    sgn = _segment_outward(diagram)
    # flux[t, a, b] = sum_k sgn[a, k] m_k^T n_k . (A_T grad lambda_b)
    nm = diagram.normal_T * diagram.m_ij_T[..., None]  # (M, 3, 2)
    out_n = np.einsum("ak,tkd->tad", sgn, nm)  # (M, 3, 2) summed outward normal * length
    flux = np.einsum("tad,tdx,tbx->tab", out_n, A_T, g)
    ee = mesh.element_edges
    edges = mesh.edges
    n_e = len(edges)
    total = np.zeros(n_e)
    for k, (a, b) in enumerate(LOCAL_EDGES):
        first = mesh.elements[:, a] == edges[ee[:, k], 0]
        # flux of psi_j out of Omega_i with i = edges[:,0]
        val = np.where(first, flux[:, a, b], flux[:, b, a])
        np.add.at(total, ee[:, k], val)
    m, d = diagram.m_ij, diagram.d_ij
    pos = m > 0
    mu = np.zeros(n_e)
    mu[pos] = d[pos] / m[pos] * total[pos]
    if dA_T is None:
        return mu, None
    slots = edge_slots(mesh)
    dmu = np.zeros((n_e, 4))
    dflux = np.einsum("tad,tkdx,tbx->tkab", out_n, dA_T, g)  # (M, 3 vertex k, 3, 3)
    for k, (a, b) in enumerate(LOCAL_EDGES):
        e = ee[:, k]
        first = mesh.elements[:, a] == edges[e, 0]
        val = np.where(first[:, None], dflux[:, :, a, b], dflux[:, :, b, a])  # (M, 3)
        for loc in range(3):
            vert = mesh.elements[:, loc]
            col = np.argmax(slots[e] == vert[:, None], axis=1)
            np.add.at(dmu, (e, col), val[:, loc])
    scale = np.where(pos, d / np.where(pos, m, 1.0), 0.0)
    return mu, dmu * scale[:, None]


def compute_edge_coefficients(coeffs, diagram, scheme, w, *, use_matrix_mu=None, rule=None, nseg=3):
    mesh = diagram.mesh
    w = np.asarray(w, dtype=float)
    edges = mesh.edges
    xi, xj = mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]]
    mid = 0.5 * (xi + xj)
    wav = 0.5 * (w[edges[:, 0]] + w[edges[:, 1]])
    n_e = len(edges)
    slots = edge_slots(mesh)
    if use_matrix_mu is None:
        use_matrix_mu = coeffs.matrix
    if use_matrix_mu:
        rule = rule if rule is not None else fragment_rule(mesh, diagram)
        A_T, dA_T = element_mean_A(coeffs, mesh, rule, w)
        mu, dmu = matrix_mu(diagram, A_T, dA_T)
    else:
        mu = np.asarray(coeffs.A(mid[:, 0], mid[:, 1], wav), dtype=float)
        dmu = np.zeros((n_e, 4))
        dmu[:, :2] = 0.5 * np.asarray(coeffs.dA(mid[:, 0], mid[:, 1], wav))[:, None]

    if diagram.kind == VORONOI:
        bv = coeffs.b(mid[:, 0], mid[:, 1], wav)
        dbv = coeffs.db(mid[:, 0], mid[:, 1], wav)
        gamma = np.einsum("ed,ed->e", diagram.nu, bv)
        dgamma = np.zeros((n_e, 4))
        dgamma[:, :2] = 0.5 * np.einsum("ed,ed->e", diagram.nu, dbv)[:, None]
    else:
        gamma, dgamma = _donald_gamma(coeffs, diagram, w, slots, nseg)

    d = diagram.d_ij
    pos = mu != 0
    z = np.zeros(n_e)
    z[pos] = gamma[pos] * d[pos] / mu[pos]
    r = np.asarray(scheme.r(z), dtype=float)
    r[~pos] = np.where(gamma[~pos] > 0, 1.0, np.where(gamma[~pos] < 0, 0.0, 0.5))
    drz = np.where(pos, scheme.dr(z), 0.0)
    safe = np.where(pos, mu, 1.0)
    dr = drz[:, None] * d[:, None] * (dgamma / safe[:, None] - (gamma / safe**2)[:, None] * dmu)
    dr[~pos] = 0.0
    return EdgeCoefficients(mu, gamma, r, z, slots, dmu, dgamma, dr)


def _donald_gamma(coeffs, diagram, w, slots, nseg):
    """gamma_ij m_ij = sum_T integral over Gamma_ij^T of n . b(x, w_T) ds."""
    mesh = diagram.mesh
    s, ws = segment_rule(nseg)
    sb = diagram.segment_barycentric  # (M, 3, 2, 3)
    bary = sb[:, :, 0, None, :] * (1.0 - s)[None, None, :, None] + sb[:, :, 1, None, :] * s[None, None, :, None]
    pts = np.einsum("tkqa,tad->tkqd", bary, mesh.vertices[mesh.elements])
    wel = np.asarray(w)[mesh.elements]
    wq = np.einsum("tkqa,ta->tkq", bary, wel)
    b = coeffs.b(pts[..., 0], pts[..., 1], wq)
    db = coeffs.db(pts[..., 0], pts[..., 1], wq)
    n = diagram.normal_T * diagram.edge_sign[..., None]  # oriented edges[:,0] -> edges[:,1]
    lw = diagram.m_ij_T[..., None] * ws[None, None, :]  # (M, 3, Q)
    flux = np.einsum("tkq,tkqd,tkd->tk", lw, b, n)
    dflux = np.einsum("tkq,tkqd,tkd,tkqa->tka", lw, db, n, bary)
    ee = mesh.element_edges
    n_e = len(mesh.edges)
    total = np.bincount(ee.ravel(), weights=flux.ravel(), minlength=n_e)
    dtotal = np.zeros((n_e, 4))
    for k in range(3):
        e = ee[:, k]
        for loc in range(3):
            vert = mesh.elements[:, loc]
            col = np.argmax(slots[e] == vert[:, None], axis=1)
            np.add.at(dtotal, (e, col), dflux[:, k, loc])
    mm = diagram.m_ij
    pos = mm > 0
    inv = np.where(pos, 1.0 / np.where(pos, mm, 1.0), 0.0)
    return total * inv, dtotal * inv[:, None]


# -- the discrete system -----------------------------------------------------------------


class DiscreteSystem:
    """Residual F(w) = a_T(w; psi_i) - <f_T, psi_i> over interior vertices.

    ``mode="fv"`` is the finite-volume scheme; ``mode="galerkin"`` is the
    conforming fallback a_T := a, f_T := <f, .> evaluated with ``rule``.
    """

    def __init__(self, problem, diagram, scheme, *, mode=FV, rule=None, div_free=None, use_matrix_mu=None,
                 quad_degree=5):
        if mode not in (FV, GALERKIN):
            raise ValueError(f"unknown assembly mode {mode!r}")
        self.problem = problem
        self.coeffs = problem.split.reduced
        self.diagram = diagram
        self.mesh = diagram.mesh
        self.scheme = scheme
        self.mode = mode
        self.rule = rule if rule is not None else fragment_rule(self.mesh, diagram, quad_degree)
        self.div_free = problem.div_free if div_free is None else bool(div_free)
        self.use_matrix_mu = self.coeffs.matrix if use_matrix_mu is None else bool(use_matrix_mu)
        self.dofs = self.mesh.interior
        self.n_dofs = len(self.dofs)

    # dof helpers
    def expand(self, x):
        w = np.zeros(self.mesh.n_vertices)
        w[self.dofs] = x
        return w

    def restrict(self, w):
        return np.asarray(w, dtype=float)[self.dofs]

    def edge_coefficients(self, w):
        return compute_edge_coefficients(self.coeffs, self.diagram, self.scheme, w,
                                         use_matrix_mu=self.use_matrix_mu, rule=self.rule)

    # -- flux pieces -------------------------------------------------------------------

    def _edge_flux(self, w, ec):
        """Per-unit-length fluxes (g_i, g_j) for every edge."""
        edges = self.mesh.edges
        wi, wj = w[edges[:, 0]], w[edges[:, 1]]
        D = wi - wj
        diff = ec.mu * D / self.diagram.d_ij if self._fv_diffusion else 0.0
        if self.div_free:
            P = ec.r * wi + (1.0 - ec.r) * wj
            return diff + P * ec.gamma, -diff - P * ec.gamma
        return diff - (1.0 - ec.r) * ec.gamma * D, -diff - ec.r * ec.gamma * D

    @property
    def _fv_diffusion(self):
        return self.diagram.kind == VORONOI

    def _reaction(self, w):
        x, y = self.mesh.vertices[:, 0], self.mesh.vertices[:, 1]
        return np.asarray(self.coeffs.c(x, y, w), dtype=float), np.asarray(self.coeffs.dc(x, y, w), dtype=float)

    # -- operator ------------------------------------------------------------------------

    def operator(self, w):
        """a_T(w; psi_i) for every vertex i (boundary rows included)."""
        w = np.asarray(w, dtype=float)
        if self.mode == GALERKIN:
            res, _ = galerkin_element_arrays(self.coeffs, self.mesh, self.rule, w)
            return scatter_vector(self.mesh, res)
        n = self.mesh.n_vertices
        ec = self.edge_coefficients(w)
        gi, gj = self._edge_flux(w, ec)
        m = self.diagram.m_ij
        edges = self.mesh.edges
        out = np.bincount(edges[:, 0], weights=gi * m, minlength=n)
        out += np.bincount(edges[:, 1], weights=gj * m, minlength=n)
        c, _ = self._reaction(w)
        out += c * w * self.diagram.m_i
        if not self._fv_diffusion:
            res, _ = galerkin_element_arrays(self.coeffs, self.mesh, self.rule, w, diffusion_only=True)
            out += scatter_vector(self.mesh, res)
        return out

    def load(self):
        """<f_T, psi_i> for every vertex."""
        if self.mode == GALERKIN:
            return load_vector(self.problem.f, self.mesh, self.rule)
        return assemble_lumped_rhs(self.problem.f, self.diagram)

    def residual(self, x):
        w = self.expand(x)
        return (self.operator(w) - self.load())[self.dofs]

    def form(self, w, v):
        """a_T(w; v) = sum_i v_i a_T(w; psi_i)."""
        return float(np.dot(np.asarray(v, dtype=float), self.operator(w)))

    # -- Jacobian ------------------------------------------------------------------------

    def jacobian_full(self, w):
        w = np.asarray(w, dtype=float)
        n = self.mesh.n_vertices
        if self.mode == GALERKIN:
            _, jac = galerkin_element_arrays(self.coeffs, self.mesh, self.rule, w)
            return scatter_matrix(self.mesh, jac)
        ec = self.edge_coefficients(w)
        edges = self.mesh.edges
        wi, wj = w[edges[:, 0]], w[edges[:, 1]]
        D = wi - wj
        d = self.diagram.d_ij
        m = self.diagram.m_ij
        slots = ec.slots
        dD = np.zeros_like(ec.dmu)
        dD[:, 0], dD[:, 1] = 1.0, -1.0
        if self._fv_diffusion:
            ddiff = (ec.dmu * D[:, None] + ec.mu[:, None] * dD) / d[:, None]
        else:
            ddiff = 0.0
        r, g = ec.r[:, None], ec.gamma[:, None]
        if self.div_free:
            dP = ec.dr * D[:, None]
            dP[:, 0] += ec.r
            dP[:, 1] += 1.0 - ec.r
            P = (ec.r * wi + (1.0 - ec.r) * wj)[:, None]
            dconv = dP * g + P * ec.dgamma
            dgi, dgj = ddiff + dconv, -ddiff - dconv
        else:
            Dc = D[:, None]
            dgi = ddiff + ec.dr * g * Dc - (1.0 - r) * (ec.dgamma * Dc + g * dD)
            dgj = -ddiff - ec.dr * g * Dc - r * (ec.dgamma * Dc + g * dD)
        valid = slots >= 0
        rows = np.concatenate([np.repeat(edges[:, 0], 4), np.repeat(edges[:, 1], 4)])
        cols = np.concatenate([slots.ravel(), slots.ravel()])
        vals = np.concatenate([(dgi * m[:, None]).ravel(), (dgj * m[:, None]).ravel()])
        keep = np.concatenate([valid.ravel(), valid.ravel()])
        J = sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n))
        c, dc = self._reaction(w)
        J = J + sp.diags((c + dc * w) * self.diagram.m_i)
        if not self._fv_diffusion:
            _, jac = galerkin_element_arrays(self.coeffs, self.mesh, self.rule, w, diffusion_only=True)
            J = J + scatter_matrix(self.mesh, jac)
        return J.tocsr()

    def jacobian(self, x):
        J = self.jacobian_full(self.expand(x))
        return J[self.dofs][:, self.dofs].tocsc()

    def jacobian_fd(self, x, step=1e-7):
        """Column-wise finite-difference Jacobian (verification only)."""
        x = np.asarray(x, dtype=float)
        f0 = self.residual(x)
        cols = []
        for k in range(len(x)):
            h = step * (1.0 + abs(x[k]))
            xp = x.copy()
            xp[k] += h
            cols.append((self.residual(xp) - f0) / h)
        return np.column_stack(cols) if cols else np.zeros((0, 0))

    # -- element-localized pieces for the nonconformity identity --------------------------

    def local_form(self, w, v):
        """a_{T,T}(w; v) for every element, summing to a_T(w; v) when v = 0 on the boundary."""
        w = np.asarray(w, dtype=float)
        v = np.asarray(v, dtype=float)
        mesh = self.mesh
        if self.mode == GALERKIN:
            return form_a(self.coeffs, mesh, self.rule, w, v, per_element=True)
        ec = self.edge_coefficients(w)
        gi, gj = self._edge_flux(w, ec)
        edges = mesh.edges
        ee = mesh.element_edges
        per_edge = v[edges[:, 0]] * gi + v[edges[:, 1]] * gj
        out = np.sum(per_edge[ee] * self.diagram.m_ij_T, axis=1)
        c, _ = self._reaction(w)
        el = mesh.elements
        out += np.sum((c * w * v)[el] * self.diagram.m_i_T, axis=1)
        if not self._fv_diffusion:
            res, _ = galerkin_element_arrays(self.coeffs, mesh, self.rule, w, diffusion_only=True)
            out += np.sum(res * v[el], axis=1)
        return out

    def local_load(self, v):
        """<f_T, v> restricted to each element."""
        v = np.asarray(v, dtype=float)
        mesh = self.mesh
        if self.mode == GALERKIN:
            return integrate_source(self.problem.f, mesh, self.rule, v, per_element=True)
        x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
        fv = np.asarray(self.problem.f(x, y), dtype=float) * v
        return np.sum(fv[mesh.elements] * self.diagram.m_i_T, axis=1)


def assemble_lumped_rhs(f, diagram):
    """f(x_i) m_i for every vertex."""
    v = diagram.mesh.vertices
    return np.asarray(f(v[:, 0], v[:, 1]), dtype=float) * diagram.m_i


# -- discrete norms -------------------------------------------------------------------------


def v_seminorm(diagram, v):
    """|v|_V with the row sums taken over interior vertices."""
    v = np.asarray(v, dtype=float)
    mesh = diagram.mesh
    edges = mesh.edges
    D = v[edges[:, 0]] - v[edges[:, 1]]
    k = diagram.m_ij / diagram.d_ij
    mask = np.zeros(mesh.n_vertices, dtype=bool)
    mask[mesh.interior] = True
    row = np.bincount(edges[:, 0], weights=D * k, minlength=mesh.n_vertices)
    row -= np.bincount(edges[:, 1], weights=D * k, minlength=mesh.n_vertices)
    return float(np.sqrt(max(np.sum(v[mask] * row[mask]), 0.0)))


def lumped_norm(diagram, v):
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(np.sum(v * v * diagram.m_i)))


def v_norm(diagram, v):
    return float(np.hypot(v_seminorm(diagram, v), lumped_norm(diagram, v)))


def h1_seminorm(mesh, v):
    """|v|_{1,2} of a P1 field, exact."""
    grads = np.einsum("tkd,tk->td", mesh.basis_gradients, np.asarray(v, dtype=float)[mesh.elements])
    return float(np.sqrt(np.sum(np.abs(mesh.areas) * np.sum(grads**2, axis=1))))


def l2_norm(mesh, v):
    """||v||_{0,2} of a P1 field, exact."""
    ve = np.asarray(v, dtype=float)[mesh.elements]
    local = np.abs(mesh.areas) / 12.0 * (np.sum(ve**2, axis=1) + np.sum(ve, axis=1) ** 2)
    return float(np.sqrt(np.sum(local)))


def field_norms(mesh, rule, field):
    """(L2 norm, H1 seminorm) of an arbitrary field by quadrature."""
    vals, grads = as_field(field).evaluate(mesh, rule.bary)
    l2 = np.sqrt(np.sum(rule.weights * vals**2))
    h1 = np.sqrt(np.sum(rule.weights * np.sum(grads**2, axis=-1)))
    return float(l2), float(h1)


__all__ = [
    "FV",
    "GALERKIN",
    "DONALD",
    "VORONOI",
    "EdgeCoefficients",
    "DiscreteSystem",
    "compute_edge_coefficients",
    "assemble_lumped_rhs",
    "matrix_mu",
    "element_mean_A",
    "v_seminorm",
    "lumped_norm",
    "v_norm",
    "h1_seminorm",
    "l2_norm",
]
