"""Shared mesh fixtures."""

import numpy as np
import pytest

from src.mesh.build import build_disk_mesh, build_rectangle_mesh, distort_mesh
from src.mesh.mesh import Mesh
from src.operators.assembly import assemble_operators


def two_triangle_square() -> Mesh:
    return Mesh(vertices=np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
                triangles=np.array([[0, 1, 2], [0, 2, 3]]))


MESH_FACTORIES = {
    "square": lambda: build_rectangle_mesh((0.0, 1.0), (0.0, 1.0), 0.25),
    "distorted_square": lambda: distort_mesh(build_rectangle_mesh((0.0, 1.0), (0.0, 1.0), 0.25), 0.2, 1),
    "disk": lambda: build_disk_mesh(1.0, 0.25),
    "distorted_disk": lambda: distort_mesh(build_disk_mesh(1.0, 0.17), 0.2, 3),
}


@pytest.fixture
def square2():
    return two_triangle_square()


@pytest.fixture(params=sorted(MESH_FACTORIES))
def test_mesh(request):
    return MESH_FACTORIES[request.param]()


@pytest.fixture(scope="session")
def distorted_disk_ops():
    return assemble_operators(MESH_FACTORIES["distorted_disk"]())


@pytest.fixture(scope="session")
def square_ops():
    return assemble_operators(MESH_FACTORIES["square"]())
