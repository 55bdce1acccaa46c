import numpy as np
import pytest

from epicut import Ellipsoid, ParaboloidComplement, Polyhedron


@pytest.fixture
def unit_square() -> Polyhedron:
    # x1 >= 0, -x1 >= -1, x2 >= 0, -x2 >= -1
    return Polyhedron(
        normals=np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]),
        offsets=np.array([0.0, -1.0, 0.0, -1.0]),
        interior_point=np.array([0.5, 0.5]),
    )


@pytest.fixture
def unit_disk() -> Ellipsoid:
    return Ellipsoid(np.eye(2), np.zeros(2), -1.0)


@pytest.fixture
def absval() -> ParaboloidComplement:
    # d = 1 region below max(x, -x) = |x|
    return ParaboloidComplement(
        normals=np.array([[1.0], [-1.0]]), offsets=np.array([0.0, 0.0])
    )
