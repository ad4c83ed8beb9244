import numpy as np
import pytest

from fvdwr.dual import build_dual_diagram
from fvdwr.mesh import Mesh, unit_square_mesh

ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    name = report.nodeid.split("::")[-1]
    if "test_acceptance" in report.nodeid and name.startswith("test_A"):
        key = name.split("_")[1]
        ACCEPTANCE[key] = (report.outcome, name)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")

    def order(k):
        return int(k[1:])

    for key in sorted(ACCEPTANCE, key=order):
        outcome, name = ACCEPTANCE[key]
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{key:<4}{mark}  {name}")


@pytest.fixture
def fk4():
    return unit_square_mesh(4)


@pytest.fixture
def two_triangles():
    # unit square split along the diagonal (0,0)-(1,1)
    v = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    t = np.array([[0, 1, 2], [0, 2, 3]])
    return Mesh.from_arrays(v, t)


@pytest.fixture
def obtuse_mesh():
    # a square with an interior vertex pulled close to the bottom edge
    v = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0], [1.0, 0.15]])
    t = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])
    return Mesh.from_arrays(v, t)


@pytest.fixture(params=["voronoi", "donald"])
def diagram8(request):
    return build_dual_diagram(unit_square_mesh(8), request.param)
