"""Discrete dual problem and patchwise quadratic recovery.

Each vertex carries a least-squares quadratic fitted over its star (second
ring added when the star has fewer than six points).  The fit is
constrained to interpolate the vertex value, so the recovered field agrees
with the nodal data at every vertex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fields import Field, P1Field, P2Field, physical_points
from .forms import galerkin_element_arrays, goal_vector, scatter_matrix
from .newton import solve_linear

GALERKIN_DUAL = "galerkin"
FV_DUAL = "fv"


def solve_dual(system, u, goal, *, method=GALERKIN_DUAL, rule=None):
    """Solve a'(u; w, z) = j'(u; w) for all discrete w; returns the nodal z (boundary zeros).

    ``method="galerkin"`` assembles a' by conforming quadrature; ``"fv"``
    reuses the transpose of the finite-volume Jacobian.
    """
    mesh = system.mesh
    rule = rule if rule is not None else system.rule
    u = np.asarray(u, dtype=float)
    if method == GALERKIN_DUAL:
        _, jac = galerkin_element_arrays(system.coeffs, mesh, rule, u)
        J = scatter_matrix(mesh, jac)
    elif method == FV_DUAL:
        J = system.jacobian_full(u)
    else:
        raise ValueError(f"unknown dual method {method!r}")
    dofs = system.dofs
    g = goal_vector(goal, mesh, rule, u)
    Jt = sp.csr_matrix(J).T.tocsr()[dofs][:, dofs]
    z = np.zeros(mesh.n_vertices)
    if len(dofs):
        z[dofs] = solve_linear(Jt.tocsc(), g[dofs])
    return z


def galerkin_dual_matrix(system, u, rule=None):
    rule = rule if rule is not None else system.rule
    _, jac = galerkin_element_arrays(system.coeffs, system.mesh, rule, u)
    return scatter_matrix(system.mesh, jac)


# -- recovery -------------------------------------------------------------------------------


def _adjacency(mesh):
    n = mesh.n_vertices
    e = mesh.edges
    data = np.ones(2 * len(e))
    A = sp.csr_matrix((data, (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n))
    return A


def _monomials(dx, dy, full=True):
    if full:
        return np.column_stack([dx, dy, dx * dx, dx * dy, dy * dy])
    return np.column_stack([dx, dy])


@dataclass(frozen=True, eq=False)
class RecoveredField(Field):
    """Patch quadratics q_i(x) = base_i + c . (dx, dy, dx^2, dx dy, dy^2) with dx = (x - x_i) / s_i.

    ``coefficients`` (N, 6) stores [base_i, c...]; ``scale`` (N,) the patch
    length scale.  As a field it evaluates, inside element T, the quadratic
    of the vertex of T nearest to the point (ties to the lowest index).
    """

    mesh: object
    base: np.ndarray
    coefficients: np.ndarray
    scale: np.ndarray
    linear_fallback: np.ndarray

    def _quad(self, verts, pts):
        c = self.coefficients[verts]
        s = self.scale[verts]
        dx = (pts[..., 0] - self.mesh.vertices[verts, 0]) / s
        dy = (pts[..., 1] - self.mesh.vertices[verts, 1]) / s
        val = c[..., 0] + c[..., 1] * dx + c[..., 2] * dy + c[..., 3] * dx * dx + c[..., 4] * dx * dy + c[..., 5] * dy * dy
        gx = (c[..., 1] + 2 * c[..., 3] * dx + c[..., 4] * dy) / s
        gy = (c[..., 2] + c[..., 4] * dx + 2 * c[..., 5] * dy) / s
        return val, np.stack([gx, gy], axis=-1)

    def evaluate_vertex_quadratic(self, vertex, points):
        """Value and gradient of the quadratic attached to ``vertex`` at ``points`` (..., 2)."""
        points = np.asarray(points, dtype=float)
        verts = np.full(points.shape[:-1], int(vertex))
        return self._quad(verts, points)

    def evaluate(self, mesh, bary):
        pts = physical_points(mesh, bary)
        el = mesh.elements  # (M, 3)
        corners = mesh.vertices[el]  # (M, 3, 2)
        dist = np.linalg.norm(pts[:, :, None, :] - corners[:, None, :, :], axis=-1)  # (M, Q, 3)
        tol = 1e-12 * mesh.diameters[:, None]
        best_d = dist[..., 0]
        verts = np.broadcast_to(el[:, None, 0], best_d.shape).copy()
        for k in (1, 2):
            dk = dist[..., k]
            vk = np.broadcast_to(el[:, None, k], dk.shape)
            take = (dk < best_d - tol) | ((np.abs(dk - best_d) <= tol) & (vk < verts))
            best_d = np.where(take, dk, best_d)
            verts = np.where(take, vk, verts)
        return self._quad(verts, pts)

    def midpoint_values(self):
        """Average of the two endpoint quadratics at every edge midpoint."""
        e = self.mesh.edges
        mid = 0.5 * (self.mesh.vertices[e[:, 0]] + self.mesh.vertices[e[:, 1]])
        v0, _ = self._quad(e[:, 0], mid)
        v1, _ = self._quad(e[:, 1], mid)
        return 0.5 * (v0 + v1)

    def as_p2(self, dirichlet=False):
        """Continuous P2 field: base values at vertices, recovered values at midpoints."""
        mids = self.midpoint_values()
        if dirichlet:
            mids = mids.copy()
            mids[self.mesh.boundary_edges] = 0.0
        return P2Field(np.asarray(self.base, dtype=float), mids)


def recover_higher_order(field, mesh) -> RecoveredField:
    """Fit a vertex-interpolating least-squares quadratic on every vertex star."""
    u = np.asarray(field.values if isinstance(field, P1Field) else field, dtype=float)
    n = mesh.n_vertices
    adj = _adjacency(mesh)
    adj2 = (adj @ adj).tocsr()
    coef = np.zeros((n, 6))
    coef[:, 0] = u
    scale = np.ones(n)
    fallback = np.zeros(n, dtype=bool)
    xy = mesh.vertices
    for i in range(n):
        nb = adj.indices[adj.indptr[i]:adj.indptr[i + 1]]
        if len(nb) < 5:
            ring2 = adj2.indices[adj2.indptr[i]:adj2.indptr[i + 1]]
            nb = np.setdiff1d(np.union1d(nb, ring2), [i])
        nb = np.sort(nb)
        d = xy[nb] - xy[i]
        s = float(np.max(np.linalg.norm(d, axis=1)))
        scale[i] = s
        dx, dy = d[:, 0] / s, d[:, 1] / s
        rhs = u[nb] - u[i]
        M = _monomials(dx, dy)
        sv = np.linalg.svd(M, compute_uv=False) if len(nb) >= 5 else np.zeros(1)
        if len(nb) >= 5 and sv[-1] > 1e-8 * sv[0]:
            c = np.linalg.solve(M.T @ M, M.T @ rhs)
            coef[i, 1:] = c
        else:
            fallback[i] = True
            M = _monomials(dx, dy, full=False)
            c, *_ = np.linalg.lstsq(M, rhs, rcond=None)
            coef[i, 1:3] = c
    return RecoveredField(mesh, u, coef, scale, fallback)
