import numpy as np
import pytest

from ellipfem.mesh import Mesh

ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail):
    """Collect one criterion verdict for the terminal summary."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)


def make_mesh(nodes, triangles, boundary_edges, boundary_nodes=None):
    nodes = np.asarray(nodes, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    be = np.asarray(boundary_edges, dtype=np.int64).reshape(-1, 2)
    flags = np.zeros(len(nodes), dtype=bool)
    if boundary_nodes is None:
        flags[be.ravel()] = True
    else:
        flags[list(boundary_nodes)] = True
    return Mesh(
        nodes=nodes,
        triangles=triangles,
        triangle_labels=np.zeros(len(triangles), dtype=np.int64),
        boundary_edges=be,
        edge_labels=np.ones(len(be), dtype=np.int64),
        node_is_boundary=flags,
    )


@pytest.fixture
def unit_triangle():
    return make_mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], [[0, 1], [1, 2], [2, 0]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
