"""Primary simplicial triangulations: construction, I/O, validation and
newest-vertex bisection.

Element vertex order carries the refinement convention: local edge
``(0, 1)`` is the refinement edge and local vertex 2 is the newest vertex.
Meshes built with :meth:`Mesh.from_arrays` are normalized to counter-clockwise
orientation with the longest edge moved to position ``(0, 1)``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, TextIO

import numpy as np

from .errors import MeshFormatError, MeshOrientationError, MeshTopologyError

#: local edges of a triangle as pairs of local vertex indices
LOCAL_EDGES = np.array([[0, 1], [1, 2], [2, 0]])

SELF_CENTERED_TOL = 1e-10


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ElementGeometry:
    circumcenter: np.ndarray
    barycenter: np.ndarray
    diameter: float
    _inverse: np.ndarray = field(repr=False)
    _origin: np.ndarray = field(repr=False)

    def barycentric(self, point) -> np.ndarray:
        """Barycentric coordinates (lambda_1, lambda_2, lambda_3) of ``point``."""
        p = np.asarray(point, dtype=float)
        l12 = (p - self._origin) @ self._inverse.T
        return np.concatenate([1.0 - l12.sum(axis=-1, keepdims=True), l12], axis=-1)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable 2D triangulation with homogeneous Dirichlet boundary flags."""

    vertices: np.ndarray
    elements: np.ndarray
    boundary: np.ndarray
    generation: int = 0

    @classmethod
    def from_arrays(cls, vertices, elements, boundary=None, generation=0, normalize=True):
        v = np.asarray(vertices, dtype=float)
        t = np.asarray(elements, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 2:
            if v.ndim == 2 and v.shape[1] == 3:
                raise MeshFormatError("only 2D meshes are supported (got 3D coordinates)")
            raise MeshFormatError(f"vertices must have shape (n, 2), got {v.shape}")
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshFormatError(f"elements must be vertex triples, got shape {t.shape}")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshFormatError("element vertex index out of range")
        t = t.copy()
        area2 = _signed_area2(v, t)
        scale = max(np.ptp(v, axis=0).max(), 1.0) if len(v) else 1.0
        degenerate = np.abs(area2) <= 1e-14 * scale**2
        if degenerate.any():
            raise MeshOrientationError(f"element {int(np.argmax(degenerate))} has zero area")
        if normalize:
            flip = area2 < 0
            t[flip] = t[flip][:, [0, 2, 1]]
            t = _longest_edge_first(v, t)
        elif (area2 < 0).any():
            raise MeshOrientationError(f"element {int(np.argmax(area2 < 0))} is clockwise")
        edges, _, edge_elements = _edge_topology(t)
        counts = (edge_elements >= 0).sum(axis=1)
        topo_boundary = np.zeros(len(v), dtype=bool)
        topo_boundary[edges[counts == 1].ravel()] = True
        if boundary is None:
            boundary = topo_boundary
        else:
            boundary = np.asarray(boundary, dtype=bool)
            if boundary.shape != (len(v),):
                raise MeshFormatError("boundary flag count does not match vertex count")
            if not np.array_equal(boundary, topo_boundary):
                raise MeshTopologyError("boundary flags disagree with the topological boundary")
        return cls(_frozen(v, float), _frozen(t, np.int64), _frozen(boundary, bool), int(generation))

    # -- sizes and index sets -------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @cached_property
    def boundary_vertices(self) -> frozenset:
        return frozenset(np.flatnonzero(self.boundary).tolist())

    @cached_property
    def interior(self) -> np.ndarray:
        """Sorted indices of interior vertices (the unknowns)."""
        return _frozen(np.flatnonzero(~self.boundary), np.int64)

    # -- topology ---------------------------------------------------------------

    @cached_property
    def _topology(self):
        return _edge_topology(self.elements)

    @property
    def edges(self) -> np.ndarray:
        """Unique edges ``(i, j)`` with ``i < j``."""
        return self._topology[0]

    @property
    def element_edges(self) -> np.ndarray:
        """Global edge id of each local edge in :data:`LOCAL_EDGES` order."""
        return self._topology[1]

    @property
    def edge_elements(self) -> np.ndarray:
        """The (up to two) elements adjacent to each edge; -1 pads boundary edges."""
        return self._topology[2]

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_elements[:, 1] < 0)

    # -- geometry ---------------------------------------------------------------

    @cached_property
    def areas(self) -> np.ndarray:
        return _frozen(0.5 * _signed_area2(self.vertices, self.elements), float)

    @cached_property
    def diameters(self) -> np.ndarray:
        p = self.vertices[self.elements]
        lengths = np.linalg.norm(p[:, [1, 2, 0]] - p, axis=2)
        return _frozen(lengths.max(axis=1), float)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @cached_property
    def circumcenter_barycentric(self) -> np.ndarray:
        """Barycentric coordinates of each element's circumcenter."""
        p = self.vertices[self.elements]
        # squared length of the side opposite local vertex k
        a2 = np.sum((p[:, [2, 0, 1]] - p[:, [1, 2, 0]]) ** 2, axis=2)
        w = a2 * (a2.sum(axis=1, keepdims=True) - 2.0 * a2)
        return _frozen(w / w.sum(axis=1, keepdims=True), float)

    @cached_property
    def circumcenters(self) -> np.ndarray:
        return np.einsum("tk,tkd->td", self.circumcenter_barycentric, self.vertices[self.elements])

    @cached_property
    def barycenters(self) -> np.ndarray:
        return self.vertices[self.elements].mean(axis=1)

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Constant gradients of the three nodal P1 basis functions, shape (M, 3, 2)."""
        p = self.vertices[self.elements]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        jac = np.stack([e1, e2], axis=2)  # columns are edge vectors
        inv = np.linalg.inv(jac)  # rows: grad lambda_1, grad lambda_2
        g12 = inv
        g0 = -g12.sum(axis=1, keepdims=True)
        return _frozen(np.concatenate([g0, g12], axis=1), float)

    def element_geometry(self, t: int) -> ElementGeometry:
        p = self.vertices[self.elements[t]]
        jac = np.column_stack([p[1] - p[0], p[2] - p[0]])
        return ElementGeometry(
            circumcenter=self.circumcenters[t].copy(),
            barycenter=self.barycenters[t].copy(),
            diameter=float(self.diameters[t]),
            _inverse=np.linalg.inv(jac),
            _origin=p[0].copy(),
        )

    def total_area(self) -> float:
        return float(np.sum(self.areas))


def _signed_area2(v, t):
    p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    return (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])


def _longest_edge_first(v, t):
    p = v[t]
    lengths = np.sum((p[:, [1, 2, 0]] - p) ** 2, axis=2)  # edge k joins local k and k+1
    k = np.argmax(lengths, axis=1)
    idx = (k[:, None] + np.arange(3)[None, :]) % 3
    return np.take_along_axis(t, idx, axis=1)


def _edge_topology(t):
    m = len(t)
    local = t[:, LOCAL_EDGES]  # (M, 3, 2)
    pairs = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    element_edges = inverse.reshape(m, 3)
    counts = np.bincount(inverse, minlength=len(edges))
    if (counts > 2).any():
        e = int(np.argmax(counts > 2))
        raise MeshTopologyError(f"edge {tuple(edges[e])} is shared by more than two elements")
    owner = np.repeat(np.arange(m), 3)
    order = np.argsort(inverse, kind="stable")
    edge_elements = -np.ones((len(edges), 2), dtype=np.int64)
    sorted_edges = inverse[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_edges[1:] != sorted_edges[:-1]
    edge_elements[sorted_edges[first], 0] = owner[order][first]
    edge_elements[sorted_edges[~first], 1] = owner[order][~first]
    return (_frozen(edges, np.int64), _frozen(element_edges, np.int64), _frozen(edge_elements, np.int64))


# -- generators and I/O ---------------------------------------------------------


def unit_square_mesh(n: int) -> Mesh:
    """Friedrichs-Keller triangulation of the unit square with ``n`` cells per side.

    Every cell is split along its (0,0)-(1,1) diagonal, so all elements are
    right isosceles triangles.
    """
    if n < 1:
        raise ValueError("n must be positive")
    x = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(x, x)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    v00 = (j * (n + 1) + i).ravel()
    v10, v01 = v00 + 1, v00 + n + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    elements = np.empty((2 * n * n, 3), dtype=np.int64)
    elements[0::2] = lower
    elements[1::2] = upper
    return Mesh.from_arrays(vertices, elements)


def load_mesh(source: TextIO | str | bytes) -> Mesh:
    """Parse the ``nv ne`` / ``x y [flag]`` / ``i j k`` text format."""
    if isinstance(source, bytes):
        source = source.decode()
    if isinstance(source, str):
        source = io.StringIO(source)
    lines = [ln.split("#", 1)[0].strip() for ln in source]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise MeshFormatError("empty mesh stream")
    try:
        nv, ne = (int(tok) for tok in lines[0].split())
    except ValueError as exc:
        raise MeshFormatError(f"bad header line {lines[0]!r}") from exc
    if len(lines) != 1 + nv + ne:
        raise MeshFormatError(f"expected {nv} vertex and {ne} element lines, got {len(lines) - 1} lines")
    vertices = np.empty((nv, 2))
    flags = []
    for k, ln in enumerate(lines[1 : 1 + nv]):
        tok = ln.split()
        if len(tok) not in (2, 3):
            raise MeshFormatError(f"vertex line {k}: expected 'x y [flag]', got {ln!r}")
        try:
            vertices[k] = float(tok[0]), float(tok[1])
            if len(tok) == 3:
                flags.append(bool(int(tok[2])))
        except ValueError as exc:
            raise MeshFormatError(f"vertex line {k}: {ln!r}") from exc
    if flags and len(flags) != nv:
        raise MeshFormatError("boundary flags must be given for all vertices or none")
    elements = np.empty((ne, 3), dtype=np.int64)
    for k, ln in enumerate(lines[1 + nv :]):
        tok = ln.split()
        if len(tok) != 3:
            raise MeshFormatError(f"element line {k}: expected 'i j k', got {ln!r}")
        try:
            elements[k] = [int(s) for s in tok]
        except ValueError as exc:
            raise MeshFormatError(f"element line {k}: {ln!r}") from exc
    return Mesh.from_arrays(vertices, elements, boundary=np.array(flags) if flags else None)


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        return load_mesh(fh)


def dump_mesh(mesh: Mesh) -> str:
    out = [f"{mesh.n_vertices} {mesh.n_elements}"]
    for (x, y), b in zip(mesh.vertices, mesh.boundary):
        out.append(f"{float(x)!r} {float(y)!r} {int(b)}")
    out.extend(f"{i} {j} {k}" for i, j, k in mesh.elements)
    return "\n".join(out) + "\n"


def write_mesh(mesh: Mesh, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dump_mesh(mesh))


# -- validation -------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    kind: str
    self_centered: np.ndarray
    delaunay: bool
    delaunay_violations: tuple
    min_shape_ratio: float

    @property
    def all_self_centered(self) -> bool:
        return bool(self.self_centered.all())

    @property
    def offending_element(self):
        bad = np.flatnonzero(~self.self_centered)
        return int(bad[0]) if len(bad) else None

    @property
    def ok(self) -> bool:
        if self.kind == "voronoi":
            return self.all_self_centered and self.delaunay
        return self.min_shape_ratio > 0.0


def validate_primary_mesh(mesh: Mesh, kind: str = "voronoi") -> ValidationReport:
    """Report self-centeredness/Delaunay (Voronoi) and shape regularity (Donald).

    Both sets of statistics are always computed; ``kind`` only selects which
    of them decides :attr:`ValidationReport.ok`.
    """
    kind = kind.lower()
    if kind not in ("voronoi", "donald"):
        raise ValueError(f"unknown dual kind {kind!r}")
    self_centered = (mesh.circumcenter_barycentric >= -SELF_CENTERED_TOL).all(axis=1)
    self_centered.setflags(write=False)

    p = mesh.vertices[mesh.elements]
    # interior angle at each local vertex
    u = p[:, [1, 2, 0]] - p
    w = p[:, [2, 0, 1]] - p
    cosang = np.einsum("tkd,tkd->tk", u, w) / (np.linalg.norm(u, axis=2) * np.linalg.norm(w, axis=2))
    angles = np.arccos(np.clip(cosang, -1.0, 1.0))
    # local edge k (k, k+1) is opposite local vertex k+2
    opposite = angles[:, [2, 0, 1]]
    violations = []
    ee = mesh.element_edges
    angle_of_edge = np.zeros((len(mesh.edges), 2))
    for slot in range(2):
        t = mesh.edge_elements[:, slot]
        has = t >= 0
        k = np.argmax(ee[t[has]] == np.flatnonzero(has)[:, None], axis=1)
        angle_of_edge[has, slot] = opposite[t[has], k]
    interior_edges = np.flatnonzero(mesh.edge_elements[:, 1] >= 0)
    total = angle_of_edge[interior_edges].sum(axis=1)
    bad = interior_edges[total > np.pi + 1e-10]
    violations = tuple(tuple(int(v) for v in mesh.edges[e]) for e in bad)

    lengths = np.linalg.norm(u, axis=2)
    inradius = 2.0 * np.abs(mesh.areas) / lengths.sum(axis=1)
    ratio = float((inradius / mesh.diameters).min()) if mesh.n_elements else 0.0
    return ValidationReport(kind, self_centered, not violations, violations, ratio)


# -- refinement -------------------------------------------------------------------


def refine_mesh(mesh: Mesh, marked: Iterable[int]) -> Mesh:
    """Newest-vertex bisection of the marked elements with conforming closure.

    Parent vertices keep their indices; midpoints are appended in edge order.
    An empty marking returns ``mesh`` itself.
    """
    return refine_with_parents(mesh, marked)[0]


def refine_with_parents(mesh: Mesh, marked: Iterable[int]):
    """Like :func:`refine_mesh`, also returning the (K, 2) parent edge of every new vertex."""
    marked = np.unique(np.fromiter((int(m) for m in marked), dtype=np.int64))
    if marked.size == 0:
        return mesh, np.zeros((0, 2), dtype=np.int64)
    if marked.min() < 0 or marked.max() >= mesh.n_elements:
        raise IndexError("marked element index out of range")
    ee = mesh.element_edges
    edge_marked = np.zeros(len(mesh.edges), dtype=bool)
    edge_marked[ee[marked, 0]] = True
    while True:
        touched = edge_marked[ee].any(axis=1)
        need = touched & ~edge_marked[ee[:, 0]]
        if not need.any():
            break
        edge_marked[ee[need, 0]] = True

    split = np.flatnonzero(edge_marked)
    n0 = mesh.n_vertices
    midpoint_id = -np.ones(len(mesh.edges), dtype=np.int64)
    midpoint_id[split] = n0 + np.arange(len(split))
    new_vertices = 0.5 * (mesh.vertices[mesh.edges[split, 0]] + mesh.vertices[mesh.edges[split, 1]])
    vertices = np.vstack([mesh.vertices, new_vertices])

    lookup = {(int(a), int(b)): e for e, (a, b) in enumerate(mesh.edges)}

    def mid(a, b):
        e = lookup.get((a, b) if a < b else (b, a))
        if e is None:
            return -1
        return int(midpoint_id[e])

    out = []

    def bisect(a, b, c):
        m = mid(a, b)
        if m < 0:
            out.append((a, b, c))
            return
        bisect(c, a, m)
        bisect(b, c, m)

    for a, b, c in mesh.elements.tolist():
        bisect(a, b, c)
    elements = np.array(out, dtype=np.int64)
    fine = Mesh.from_arrays(vertices, elements, generation=mesh.generation + 1, normalize=False)
    return fine, mesh.edges[split].copy()


def prolongate(values, parents):
    """Extend nodal values to a refined mesh by averaging the parent edge endpoints."""
    values = np.asarray(values, dtype=float)
    return np.concatenate([values, 0.5 * (values[parents[:, 0]] + values[parents[:, 1]])])
