"""Voronoi and Donald control-volume diagrams over a primary triangulation.

Within an element ``T`` the interface piece of edge ``(a, b)`` runs from the
edge midpoint to the element "center" (circumcenter for Voronoi, barycenter
for Donald).  Each element is cut into six fragments: the triangle spanned by
a vertex, the midpoint of one of its two incident edges and the center.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NotSelfCentered
from .mesh import LOCAL_EDGES, Mesh, SELF_CENTERED_TOL

VORONOI = "voronoi"
DONALD = "donald"
KINDS = (VORONOI, DONALD)


def _ro(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DualDiagram:
    """Control-volume measures and fragment geometry.

    Per-edge arrays are indexed like ``mesh.edges`` (orientation ``i < j``);
    per-element arrays of shape ``(M, 3)`` follow ``LOCAL_EDGES`` or local
    vertex order as documented on each attribute.
    """

    kind: str
    mesh: Mesh
    center_bary: np.ndarray  # (M, 3) barycentric coords of the element center
    m_i: np.ndarray  # (N,) control-volume areas
    m_i_T: np.ndarray  # (M, 3) area of Omega_i cap T per local vertex
    m_ij: np.ndarray  # (E,) interface lengths
    m_ij_T: np.ndarray  # (M, 3) interface length inside T per local edge
    d_ij: np.ndarray  # (E,) vertex distances
    nu: np.ndarray  # (E, 2) unit vectors from edges[:,0] toward edges[:,1]
    normal_T: np.ndarray  # (M, 3, 2) unit normal of each interface piece, local a -> b
    edge_sign: np.ndarray  # (M, 3) +1 where local a -> b matches the global i -> j
    fragment_barycentric: np.ndarray  # (M, 6, 3, 3) corner barycentrics of fragments
    fragment_areas: np.ndarray  # (M, 6)

    #: owning local vertex and local edge of fragment f = 2*k + s
    FRAGMENT_OWNER = LOCAL_EDGES.reshape(-1)
    FRAGMENT_EDGE = np.repeat(np.arange(3), 2)

    # -- convenience accessors ---------------------------------------------------

    @cached_property
    def _edge_index(self):
        return {(int(a), int(b)): e for e, (a, b) in enumerate(self.mesh.edges)}

    def edge_id(self, i: int, j: int) -> int:
        return self._edge_index[(i, j) if i < j else (j, i)]

    def interface_length(self, i: int, j: int) -> float:
        return float(self.m_ij[self.edge_id(i, j)])

    def distance(self, i: int, j: int) -> float:
        return float(self.d_ij[self.edge_id(i, j)])

    def direction(self, i: int, j: int) -> np.ndarray:
        e = self.edge_id(i, j)
        return self.nu[e] if i < j else -self.nu[e]

    def neighbors(self, i: int) -> list[int]:
        """The set Lambda_i of vertices sharing a nonzero interface with ``i``."""
        edges = self.mesh.edges
        hit = ((edges[:, 0] == i) | (edges[:, 1] == i)) & (self.m_ij != 0)
        return sorted(int(v) for v in edges[hit].ravel() if v != i)

    @cached_property
    def center_points(self) -> np.ndarray:
        return np.einsum("tk,tkd->td", self.center_bary, self.mesh.vertices[self.mesh.elements])

    @cached_property
    def segment_endpoints(self) -> np.ndarray:
        """(M, 3, 2, 2): start (edge midpoint) and end (center) of each interface piece."""
        p = self.mesh.vertices[self.mesh.elements]
        mids = 0.5 * (p[:, LOCAL_EDGES[:, 0]] + p[:, LOCAL_EDGES[:, 1]])
        centers = np.broadcast_to(self.center_points[:, None, :], mids.shape)
        return np.stack([mids, centers], axis=2)

    @cached_property
    def segment_barycentric(self) -> np.ndarray:
        """(M, 3, 2, 3): barycentrics of the interface endpoints."""
        m = self.mesh.n_elements
        mids = np.zeros((3, 3))
        for k, (a, b) in enumerate(LOCAL_EDGES):
            mids[k, a] = mids[k, b] = 0.5
        start = np.broadcast_to(mids, (m, 3, 3))
        end = np.broadcast_to(self.center_bary[:, None, :], (m, 3, 3))
        return np.stack([start, end], axis=2)

    def fragments_of(self, i: int):
        """Yield ``(element, local edge, area)`` of every fragment owned by vertex ``i``."""
        t_idx, local = np.nonzero(self.mesh.elements == i)
        for t, a in zip(t_idx, local):
            for f in range(6):
                if self.FRAGMENT_OWNER[f] == a:
                    yield int(t), int(self.FRAGMENT_EDGE[f]), float(self.fragment_areas[t, f])


def build_dual_diagram(mesh: Mesh, kind: str = VORONOI) -> DualDiagram:
    kind = kind.lower()
    if kind not in KINDS:
        raise ValueError(f"unknown dual kind {kind!r}")
    m = mesh.n_elements
    if kind == VORONOI:
        cb = mesh.circumcenter_barycentric
        bad = np.flatnonzero((cb < -SELF_CENTERED_TOL).any(axis=1))
        if len(bad):
            raise NotSelfCentered(bad[0])
        cb = np.clip(cb, 0.0, None)
        cb = cb / cb.sum(axis=1, keepdims=True)
    else:
        cb = np.full((m, 3), 1.0 / 3.0)

    p = mesh.vertices[mesh.elements]  # (M, 3, 2)
    center = np.einsum("tk,tkd->td", cb, p)
    a_loc, b_loc = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
    mids = 0.5 * (p[:, a_loc] + p[:, b_loc])  # (M, 3, 2)
    seg = center[:, None, :] - mids
    m_ij_T = np.linalg.norm(seg, axis=2)
    # zero-length pieces (circumcenter on an edge) are kept with measure exactly 0
    m_ij_T[m_ij_T <= 1e-12 * mesh.diameters[:, None]] = 0.0

    edge_vec = p[:, b_loc] - p[:, a_loc]
    edge_dir = edge_vec / np.linalg.norm(edge_vec, axis=2, keepdims=True)
    normal = np.stack([seg[..., 1], -seg[..., 0]], axis=2)
    nlen = np.linalg.norm(normal, axis=2, keepdims=True)
    scale = mesh.diameters[:, None, None]
    degenerate = nlen <= 1e-14 * scale
    normal = np.where(degenerate, edge_dir, normal / np.where(degenerate, 1.0, nlen))
    flip = np.einsum("tkd,tkd->tk", normal, edge_vec) < 0
    normal[flip] *= -1.0

    # fragment corners in barycentric coordinates
    eye = np.eye(3)
    frag = np.empty((m, 6, 3, 3))
    for k, (a, b) in enumerate(LOCAL_EDGES):
        mid = 0.5 * (eye[a] + eye[b])
        for s, owner in enumerate((a, b)):
            f = 2 * k + s
            frag[:, f, 0] = eye[owner]
            frag[:, f, 1] = mid
            frag[:, f, 2] = cb
    area_T = np.abs(mesh.areas)
    frag_area = area_T[:, None] * np.abs(np.linalg.det(frag))
    frag_area[frag_area <= 1e-12 * area_T[:, None]] = 0.0

    m_i_T = np.zeros((m, 3))
    for f in range(6):
        m_i_T[:, DualDiagram.FRAGMENT_OWNER[f]] += frag_area[:, f]
    m_i = np.bincount(mesh.elements.ravel(), weights=m_i_T.ravel(), minlength=mesh.n_vertices)

    ee = mesh.element_edges
    m_ij = np.bincount(ee.ravel(), weights=m_ij_T.ravel(), minlength=len(mesh.edges))
    ev = mesh.vertices[mesh.edges[:, 1]] - mesh.vertices[mesh.edges[:, 0]]
    d_ij = np.linalg.norm(ev, axis=1)
    nu = ev / d_ij[:, None]
    edge_sign = np.where(mesh.elements[:, a_loc] == mesh.edges[ee, 0], 1.0, -1.0)

    return DualDiagram(
        kind=kind,
        mesh=mesh,
        center_bary=_ro(cb),
        m_i=_ro(m_i),
        m_i_T=_ro(m_i_T),
        m_ij=_ro(m_ij),
        m_ij_T=_ro(m_ij_T),
        d_ij=_ro(d_ij),
        nu=_ro(nu),
        normal_T=_ro(normal),
        edge_sign=_ro(edge_sign),
        fragment_barycentric=_ro(frag),
        fragment_areas=_ro(frag_area),
    )
