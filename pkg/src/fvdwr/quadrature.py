"""Quadrature rules on triangles and segments, plus the per-element volume
rule built on control-volume fragments.

All triangle rules are returned in barycentric coordinates with weights
normalized to sum to one, so a physical integral is
``area * sum(weights * integrand)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import QuadratureError


@lru_cache(maxsize=None)
def triangle_rule(degree: int):
    """Barycentric points (Q, 3) and unit-sum weights (Q,) exact for ``degree``."""
    if degree < 0:
        raise QuadratureError(f"unsupported quadrature degree {degree}")
    if degree <= 1:
        pts = np.array([[1 / 3, 1 / 3, 1 / 3]])
        wts = np.array([1.0])
    elif degree == 2:
        pts = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
        wts = np.full(3, 1 / 3)
    elif degree <= 5:
        s15 = np.sqrt(15.0)
        a1, b1 = (6 - s15) / 21, (9 + 2 * s15) / 21
        a2, b2 = (6 + s15) / 21, (9 - 2 * s15) / 21
        w1, w2 = (155 - s15) / 1200, (155 + s15) / 1200
        pts = np.array(
            [
                [1 / 3, 1 / 3, 1 / 3],
                [b1, a1, a1], [a1, b1, a1], [a1, a1, b1],
                [b2, a2, a2], [a2, b2, a2], [a2, a2, b2],
            ]
        )
        wts = np.array([9 / 40, w1, w1, w1, w2, w2, w2])
    else:
        pts, wts = _collapsed_gauss(degree)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def _collapsed_gauss(degree):
    # Duffy map of a tensor Gauss-Legendre rule; exact for polynomials of ``degree``
    n = degree // 2 + 2
    x, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (x + 1.0)
    ws = 0.5 * w
    u, v = np.meshgrid(s, s, indexing="ij")
    wu, wv = np.meshgrid(ws, ws, indexing="ij")
    l1 = u.ravel()
    l2 = (v * (1.0 - u)).ravel()
    weight = (wu * wv * (1.0 - u)).ravel() * 2.0
    pts = np.column_stack([1.0 - l1 - l2, l1, l2])
    return pts, weight


@lru_cache(maxsize=None)
def segment_rule(npoints: int = 3):
    """Gauss-Legendre parameters on [0, 1] and unit-sum weights."""
    x, w = np.polynomial.legendre.leggauss(npoints)
    s = 0.5 * (x + 1.0)
    w = 0.5 * w
    s.setflags(write=False)
    w.setflags(write=False)
    return s, w


@dataclass(frozen=True, eq=False)
class VolumeRule:
    """Quadrature points of every element, tagged by control-volume fragment.

    Attributes
    ----------
    bary : (M, Q, 3)
        Barycentric coordinates of the points w.r.t. their element.
    weights : (M, Q)
        Physical weights (include the element area).
    owner : (Q,) or None
        Local vertex owning the fragment that contains each point.
    edge : (Q,) or None
        Local edge (index into ``LOCAL_EDGES``) of that fragment.
    """

    bary: np.ndarray
    weights: np.ndarray
    owner: np.ndarray | None = None
    edge: np.ndarray | None = None

    @property
    def has_fragments(self) -> bool:
        return self.owner is not None

    def points(self, mesh) -> np.ndarray:
        return np.einsum("tqk,tkd->tqd", self.bary, mesh.vertices[mesh.elements])


def element_rule(mesh, degree: int = 5) -> VolumeRule:
    pts, wts = triangle_rule(degree)
    m = mesh.n_elements
    bary = np.broadcast_to(pts, (m,) + pts.shape)
    weights = np.abs(mesh.areas)[:, None] * wts[None, :]
    return VolumeRule(bary, weights)


def fragment_rule(mesh, diagram, degree: int = 5) -> VolumeRule:
    """Composite rule over the six fragments ``(x_p, edge midpoint, center)`` of each element."""
    pts, wts = triangle_rule(degree)
    frag_bary = diagram.fragment_barycentric  # (M, 6, 3 corners, 3)
    frag_area = diagram.fragment_areas  # (M, 6)
    bary = np.einsum("qc,tfck->tfqk", pts, frag_bary)
    weights = frag_area[:, :, None] * wts[None, None, :]
    m, nf, nq = weights.shape
    owner = np.repeat(diagram.FRAGMENT_OWNER, nq)
    edge = np.repeat(diagram.FRAGMENT_EDGE, nq)
    return VolumeRule(bary.reshape(m, nf * nq, 3), weights.reshape(m, nf * nq), owner, edge)
