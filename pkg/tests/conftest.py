import numpy as np
import pytest

from ccbm_stokes.expressions import VectorField
from ccbm_stokes.fem.spaces import build_spaces
from ccbm_stokes.mesh import SIGMA, Circle, Ellipse, generate_annulus, make_mesh
from ccbm_stokes.shape import curvature
from ccbm_stokes.state import PhysicsCase, solve_adjoint, solve_state


@pytest.fixture(scope="session")
def gravity_case():
    return PhysicsCase(0.01, VectorField.parse(["-10*x", "-10*y"]), VectorField.zero(), "gravity")


@pytest.fixture(scope="session")
def zero_case():
    return PhysicsCase(0.01, VectorField.zero(), VectorField.zero(), "zero")


@pytest.fixture(scope="session")
def circle_mesh():
    return generate_annulus(0.4, Circle(1.0), 30, 70)


@pytest.fixture(scope="session")
def ellipse_mesh():
    return generate_annulus(0.4, Ellipse(1.0, 1.1), 30, 70)


@pytest.fixture(scope="session")
def ellipse_solution(ellipse_mesh, gravity_case):
    mesh = ellipse_mesh
    spaces = build_spaces(mesh)
    state = solve_state(mesh, spaces, gravity_case)
    adjoint = solve_adjoint(mesh, spaces, gravity_case, state)
    return mesh, spaces, state, adjoint, curvature(mesh, spaces)


@pytest.fixture
def square_mesh():
    """Unit square split into four triangles around its centre."""
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]])
    tris = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])
    edges = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
    return make_mesh(nodes, tris, edges, np.full(4, int(SIGMA)))
