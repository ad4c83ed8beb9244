import numpy as np
import pytest

from fvdwr.dual import build_dual_diagram
from fvdwr.errors import NotSelfCentered
from fvdwr.mesh import unit_square_mesh


def test_control_volumes_partition_domain(diagram8):
    mesh = diagram8.mesh
    assert diagram8.m_i.sum() == pytest.approx(mesh.total_area(), abs=1e-13)
    assert np.allclose(diagram8.m_i_T.sum(axis=1), np.abs(mesh.areas), atol=1e-15)
    assert np.allclose(diagram8.fragment_areas.sum(axis=1), np.abs(mesh.areas), atol=1e-15)


def test_voronoi_fk_interfaces():
    # axis edges: interface length h, diagonals: zero
    n = 8
    h = 1.0 / n
    d = build_dual_diagram(unit_square_mesh(n), "voronoi")
    axis = np.isclose(d.d_ij, h)
    assert np.allclose(d.m_ij[axis & ~np.isin(np.arange(len(d.d_ij)), d.mesh.boundary_edges)], h)
    assert np.allclose(d.m_ij[~axis], 0.0, atol=1e-15)
    inner = d.mesh.interior
    assert np.allclose(d.m_i[inner], h * h)


def test_donald_volumes_are_one_third():
    d = build_dual_diagram(unit_square_mesh(4), "donald")
    assert np.allclose(d.m_i_T, np.abs(d.mesh.areas)[:, None] / 3.0)
    assert np.all(d.m_ij[np.setdiff1d(np.arange(len(d.m_ij)), d.mesh.boundary_edges)] > 0)


def test_direction_and_neighbors():
    d = build_dual_diagram(unit_square_mesh(2), "voronoi")
    i = 4  # center vertex
    nb = d.neighbors(i)
    assert len(nb) == 4  # diagonals carry no interface
    for j in nb:
        v = d.mesh.vertices[j] - d.mesh.vertices[i]
        assert np.allclose(d.direction(i, j), v / np.linalg.norm(v))
        assert d.distance(i, j) == pytest.approx(0.5)


def test_voronoi_on_obtuse_mesh_raises(obtuse_mesh):
    with pytest.raises(NotSelfCentered) as info:
        build_dual_diagram(obtuse_mesh, "voronoi")
    assert info.value.element >= 0


def test_donald_on_obtuse_mesh(obtuse_mesh):
    d = build_dual_diagram(obtuse_mesh, "donald")
    assert d.m_i.sum() == pytest.approx(obtuse_mesh.total_area())


def test_unknown_kind(fk4):
    with pytest.raises(ValueError):
        build_dual_diagram(fk4, "box")
