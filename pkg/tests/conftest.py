import numpy as np
import pytest

from fvsolid.mesh import BoundaryPatch, PolyMesh, compute_geometry, build_block_mesh

# Lines reported by the acceptance module, echoed in the terminal summary.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def unit_tet_mesh():
    """Right tetrahedron with unit legs, each face a separate patch."""
    points = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
    faces = [(0, 2, 1), (0, 1, 3), (0, 3, 2), (1, 2, 3)]
    patches = [BoundaryPatch(f"p{i}", "traction", i, 1) for i in range(4)]
    return PolyMesh(points, faces, [0, 0, 0, 0], [], patches, 1)


def two_cube_mesh(shift=0.0):
    """Two unit cubes along x; ``shift`` moves the far face of the second cube in y."""
    mesh = build_block_mesh((0, 0, 0), (2, 1, 1), (2, 1, 1))
    if shift:
        pts = mesh.points.copy()
        pts[np.isclose(pts[:, 0], 2.0), 1] += shift
        mesh = PolyMesh(pts, mesh.faces, mesh.owner, mesh.neighbour, mesh.patches, mesh.n_cells)
    return mesh


@pytest.fixture
def tet_mesh():
    return unit_tet_mesh()


@pytest.fixture
def block_443():
    mesh = build_block_mesh((0, 0, 0), (1, 1, 1), (4, 4, 3))
    return mesh, compute_geometry(mesh)
