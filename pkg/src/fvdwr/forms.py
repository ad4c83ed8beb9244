"""Continuous weak forms evaluated by quadrature, and conforming P1 assembly.

The state-dependent form is used in convective shape

    a(w; v) = (A(w) grad w, grad v) + (b(w) . grad w, v) + (c(w) w, v),

which equals the skew split a0 + b_skew + d of ``eval_continuous_forms``
whenever v vanishes on the boundary.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .fields import as_field, physical_points


def _apply_A(A, g, matrix):
    if matrix:
        return np.einsum("...ab,...b->...a", A, g)
    return A[..., None] * g


def _dot(a, b):
    return np.einsum("...d,...d->...", a, b)


class PointData:
    """Coordinates and a state field sampled on a volume rule."""

    def __init__(self, mesh, rule, w):
        self.mesh = mesh
        self.rule = rule
        pts = physical_points(mesh, rule.bary)
        self.x, self.y = pts[..., 0], pts[..., 1]
        self.w, self.gw = as_field(w).evaluate(mesh, rule.bary)

    def coefficients(self, coeffs):
        x, y, w = self.x, self.y, self.w
        return {
            "A": coeffs.A(x, y, w),
            "dA": coeffs.dA(x, y, w),
            "b": coeffs.b(x, y, w),
            "db": coeffs.db(x, y, w),
            "c": coeffs.c(x, y, w),
            "dc": coeffs.dc(x, y, w),
            "div_b": coeffs.div_b(x, y, w),
        }


def _reduce(vals, weights, per_element):
    local = np.sum(weights * vals, axis=1)
    return local if per_element else float(np.sum(local))


def eval_continuous_forms(coeffs, mesh, rule, w, v, per_element=False):
    """Return {"a0", "b_skew", "d", "a", "convective"} for the pair (w, v).

    ``a`` is a0 + b_skew + d assembled from the same points; ``convective``
    is the form used by the estimator (identical to ``a`` for v = 0 on the
    boundary, up to quadrature).
    """
    pd = PointData(mesh, rule, w)
    cf = pd.coefficients(coeffs)
    vv, gv = as_field(v).evaluate(mesh, rule.bary)
    flux = _apply_A(cf["A"], pd.gw, coeffs.matrix)
    bgw = _dot(cf["b"], pd.gw)
    bgv = _dot(cf["b"], gv)
    divb = cf["div_b"] + _dot(cf["db"], pd.gw)
    a0 = _dot(flux, gv)
    b_skew = 0.5 * (bgw * vv - pd.w * bgv)
    d = cf["c"] * pd.w * vv - 0.5 * divb * pd.w * vv
    conv = a0 + bgw * vv + cf["c"] * pd.w * vv
    wts = rule.weights
    out = {
        "a0": _reduce(a0, wts, per_element),
        "b_skew": _reduce(b_skew, wts, per_element),
        "d": _reduce(d, wts, per_element),
        "convective": _reduce(conv, wts, per_element),
    }
    out["a"] = out["a0"] + out["b_skew"] + out["d"]
    return out


def form_a(coeffs, mesh, rule, w, v, per_element=False):
    """Convective form a(w; v)."""
    return eval_continuous_forms(coeffs, mesh, rule, w, v, per_element)["convective"]


def form_a_prime(coeffs, mesh, rule, w, e, v, per_element=False):
    """Derivative a'(w; e, v) of the convective form in direction e."""
    pd = PointData(mesh, rule, w)
    cf = pd.coefficients(coeffs)
    ev, ge = as_field(e).evaluate(mesh, rule.bary)
    vv, gv = as_field(v).evaluate(mesh, rule.bary)
    flux = _apply_A(cf["A"], ge, coeffs.matrix) + _apply_A(cf["dA"], pd.gw, coeffs.matrix) * (
        ev[..., None]
    )
    conv = _dot(cf["b"], ge) + _dot(cf["db"], pd.gw) * ev
    react = (cf["c"] + cf["dc"] * pd.w) * ev
    vals = _dot(flux, gv) + (conv + react) * vv
    return _reduce(vals, rule.weights, per_element)


def model_defect(split, mesh, rule, w, v, per_element=False):
    """a_delta(w; v) = a_accurate(w; v) - a_reduced(w; v); zero for a trivial split."""
    if split.accurate is None:
        m = mesh.n_elements
        return np.zeros(m) if per_element else 0.0
    acc = form_a(split.accurate, mesh, rule, w, v, per_element)
    red = form_a(split.reduced, mesh, rule, w, v, per_element)
    return acc - red


def integrate_source(f, mesh, rule, v, per_element=False):
    """<f, v> by quadrature."""
    pts = physical_points(mesh, rule.bary)
    vv, _ = as_field(v).evaluate(mesh, rule.bary)
    return _reduce(f(pts[..., 0], pts[..., 1]) * vv, rule.weights, per_element)


def eval_goal(goal, mesh, rule, u, w=None, per_element=False):
    """j(u), or j'(u; w) when a direction is given."""
    pts = physical_points(mesh, rule.bary)
    x, y = pts[..., 0], pts[..., 1]
    uv, _ = as_field(u).evaluate(mesh, rule.bary)
    if w is None:
        return _reduce(goal.density(x, y, uv), rule.weights, per_element)
    wv, _ = as_field(w).evaluate(mesh, rule.bary)
    return _reduce(goal.derivative(x, y, uv) * wv, rule.weights, per_element)


# -- conforming P1 element arrays ------------------------------------------------------


def galerkin_element_arrays(coeffs, mesh, rule, u, diffusion_only=False):
    """Local residual a(u; psi_a) (M, 3) and Jacobian a'(u; psi_b, psi_a) (M, 3, 3)."""
    pd = PointData(mesh, rule, u)
    cf = pd.coefficients(coeffs)
    lam = rule.bary  # (M, Q, 3)
    g = mesh.basis_gradients  # (M, 3, 2)
    wts = rule.weights
    flux = _apply_A(cf["A"], pd.gw, coeffs.matrix)  # (M, Q, 2)
    res = np.einsum("tq,tqd,tad->ta", wts, flux, g)
    # d/du_b of A(u) grad u: A grad psi_b + dA psi_b grad u
    if coeffs.matrix:
        Ag = np.einsum("tqxy,tby->tqbx", cf["A"], g)
        dAgu = np.einsum("tqxy,tqy->tqx", cf["dA"], pd.gw)
    else:
        Ag = cf["A"][:, :, None, None] * g[:, None, :, :]
        dAgu = cf["dA"][..., None] * pd.gw
    dflux = Ag + lam[..., None] * dAgu[:, :, None, :]  # (M, Q, 3b, 2)
    jac = np.einsum("tq,tqbd,tad->tab", wts, dflux, g)
    if not diffusion_only:
        bgu = _dot(cf["b"], pd.gw)
        cu = cf["c"] * pd.w
        res += np.einsum("tq,tq,tqa->ta", wts, bgu + cu, lam)
        bgpsi = np.einsum("tqd,tbd->tqb", cf["b"], g)
        dconv = bgpsi + (_dot(cf["db"], pd.gw) + cf["c"] + cf["dc"] * pd.w)[..., None] * lam
        jac += np.einsum("tq,tqb,tqa->tab", wts, dconv, lam)
    return res, jac


def scatter_vector(mesh, local):
    return np.bincount(mesh.elements.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)


def scatter_matrix(mesh, local):
    el = mesh.elements
    rows = np.repeat(el, 3, axis=1).ravel()
    cols = np.tile(el, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def load_vector(f, mesh, rule, per_element=False):
    """Local <f, psi_a> (M, 3) or the assembled vector."""
    pts = physical_points(mesh, rule.bary)
    fv = f(pts[..., 0], pts[..., 1])
    local = np.einsum("tq,tq,tqa->ta", rule.weights, fv, rule.bary)
    return local if per_element else scatter_vector(mesh, local)


def goal_vector(goal, mesh, rule, u):
    """j'(u; psi_i) for every vertex."""
    pts = physical_points(mesh, rule.bary)
    uv, _ = as_field(u).evaluate(mesh, rule.bary)
    dj = goal.derivative(pts[..., 0], pts[..., 1], uv)
    local = np.einsum("tq,tq,tqa->ta", rule.weights, dj, rule.bary)
    return scatter_vector(mesh, local)
