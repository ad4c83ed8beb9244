import math

import numpy as np
import pytest

from fvdwr.dual import build_dual_diagram
from fvdwr.errors import QuadratureError
from fvdwr.mesh import unit_square_mesh
from fvdwr.quadrature import element_rule, fragment_rule, segment_rule, triangle_rule


def _exact_monomial(p, q):
    # integral of l1^p l2^q over the reference triangle of area 1/2, divided by the area
    return 2.0 * math.factorial(p) * math.factorial(q) / math.factorial(p + q + 2)


@pytest.mark.parametrize("degree", [1, 2, 5, 8, 12])
def test_triangle_rule_exactness(degree):
    pts, wts = triangle_rule(degree)
    assert wts.sum() == pytest.approx(1.0, abs=1e-14)
    for p in range(degree + 1):
        for q in range(degree + 1 - p):
            approx = np.sum(wts * pts[:, 1] ** p * pts[:, 2] ** q)
            assert approx == pytest.approx(_exact_monomial(p, q), rel=1e-12, abs=1e-15)


def test_negative_degree():
    with pytest.raises(QuadratureError):
        triangle_rule(-1)


def test_segment_rule():
    s, w = segment_rule(3)
    for k in range(6):
        assert np.sum(w * s**k) == pytest.approx(1.0 / (k + 1), rel=1e-14)


@pytest.mark.parametrize("kind", ["voronoi", "donald"])
def test_fragment_rule_integrates_polynomials(kind):
    mesh = unit_square_mesh(4)
    rule = fragment_rule(mesh, build_dual_diagram(mesh, kind), 5)
    x = rule.points(mesh)
    # integral of x^2 y^3 over the unit square
    assert np.sum(rule.weights * x[..., 0] ** 2 * x[..., 1] ** 3) == pytest.approx(1.0 / 12.0, rel=1e-13)
    assert rule.has_fragments
    assert not element_rule(mesh).has_fragments


def test_fragment_rule_ownership():
    mesh = unit_square_mesh(2)
    d = build_dual_diagram(mesh, "donald")
    rule = fragment_rule(mesh, d, 2)
    # weights of the points owned by local vertex a add up to m_i^T
    for a in range(3):
        assert np.allclose(rule.weights[:, rule.owner == a].sum(axis=1), d.m_i_T[:, a])
