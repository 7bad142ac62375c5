import numpy as np
import pytest

from expandernet import SurfaceComplex, instantiate, plane_cone, tetra_cone, y_cone


@pytest.fixture(scope="session")
def disk():
    return instantiate("flat-sheet", plane_cone(), 2.0, 0.25)


@pytest.fixture(scope="session")
def ysheet():
    return instantiate("y-sheet", y_cone(), 2.0, 0.25)


@pytest.fixture(scope="session")
def tetra():
    return instantiate("tetra-cone", tetra_cone(), 2.0, 0.25)


def two_triangles(pair_a=(1, 2), pair_b=(1, 2)):
    """Two triangles sharing the edge (0, 1), consistently oriented."""
    x = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [1, -1, 0]])
    faces = [[0, 1, 2], [1, 0, 3]]
    return SurfaceComplex(x, faces, [pair_a, pair_b], 3, np.ones(4, bool), 1.0)
