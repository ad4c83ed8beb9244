"""Scalar fields on a triangulation, evaluated at barycentric quadrature points.

Every field implements ``evaluate(mesh, bary) -> (values, gradients)`` with
``bary`` of shape (M, Q, 3); values come back as (M, Q), gradients as
(M, Q, 2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import FieldMismatch
from .mesh import LOCAL_EDGES


def physical_points(mesh, bary):
    return np.einsum("tqk,tkd->tqd", bary, mesh.vertices[mesh.elements])


class Field:
    def evaluate(self, mesh, bary):
        raise NotImplementedError

    def __sub__(self, other):
        return DifferenceField(self, as_field(other))


@dataclass(frozen=True, eq=False)
class P1Field(Field):
    values: np.ndarray

    def evaluate(self, mesh, bary):
        u = np.asarray(self.values, dtype=float)
        if u.shape != (mesh.n_vertices,):
            raise FieldMismatch(f"field has {u.shape[0]} values, mesh has {mesh.n_vertices} vertices")
        ue = u[mesh.elements]  # (M, 3)
        vals = np.einsum("tqk,tk->tq", bary, ue)
        grad = np.einsum("tkd,tk->td", mesh.basis_gradients, ue)
        grads = np.broadcast_to(grad[:, None, :], vals.shape + (2,))
        return vals, grads


@dataclass(frozen=True, eq=False)
class P2Field(Field):
    """Continuous piecewise quadratic field from vertex and edge-midpoint values."""

    vertex_values: np.ndarray
    midpoint_values: np.ndarray

    def evaluate(self, mesh, bary):
        uv = np.asarray(self.vertex_values, dtype=float)[mesh.elements]  # (M, 3)
        um = np.asarray(self.midpoint_values, dtype=float)[mesh.element_edges]  # (M, 3)
        lam = bary
        g = mesh.basis_gradients  # (M, 3, 2)
        a, b = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
        phi_v = lam * (2.0 * lam - 1.0)
        phi_m = 4.0 * lam[..., a] * lam[..., b]
        vals = np.einsum("tqk,tk->tq", phi_v, uv) + np.einsum("tqk,tk->tq", phi_m, um)
        dphi_v = (4.0 * lam - 1.0)[..., None] * g[:, None, :, :]  # (M, Q, 3, 2)
        dphi_m = 4.0 * (lam[..., a, None] * g[:, None, b, :] + lam[..., b, None] * g[:, None, a, :])
        grads = np.einsum("tqkd,tk->tqd", dphi_v, uv) + np.einsum("tqkd,tk->tqd", dphi_m, um)
        return vals, grads


@dataclass(frozen=True, eq=False)
class FunctionField(Field):
    """Analytic field given by ``value(x, y)`` and ``gradient(x, y) -> (gx, gy)``."""

    value: Callable
    gradient: Callable | None = None

    def evaluate(self, mesh, bary):
        pts = physical_points(mesh, bary)
        x, y = pts[..., 0], pts[..., 1]
        vals = np.broadcast_to(np.asarray(self.value(x, y), dtype=float), x.shape)
        if self.gradient is None:
            grads = np.full(x.shape + (2,), np.nan)
        else:
            gx, gy = self.gradient(x, y)
            grads = np.stack(np.broadcast_arrays(gx, gy), axis=-1).astype(float)
        return vals, grads


@dataclass(frozen=True, eq=False)
class DifferenceField(Field):
    left: Field
    right: Field

    def evaluate(self, mesh, bary):
        lv, lg = self.left.evaluate(mesh, bary)
        rv, rg = self.right.evaluate(mesh, bary)
        return lv - rv, lg - rg


class ZeroField(Field):
    def evaluate(self, mesh, bary):
        shape = bary.shape[:2]
        return np.zeros(shape), np.zeros(shape + (2,))


def as_field(obj) -> Field:
    if isinstance(obj, Field):
        return obj
    return P1Field(np.asarray(obj, dtype=float))


def interpolate(mesh, fn) -> np.ndarray:
    """Nodal P1 interpolant of ``fn(x, y)``."""
    return np.asarray(fn(mesh.vertices[:, 0], mesh.vertices[:, 1]), dtype=float)
