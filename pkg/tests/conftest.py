import math

import numpy as np
import pytest

from confmax.mesh import gen_flat_torus, gen_icosphere

EQUILATERAL = np.array([[1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]])
SQUARE = np.eye(2)


@pytest.fixture(scope="session")
def sphere2():
    return gen_icosphere(2)


@pytest.fixture(scope="session")
def sphere3():
    return gen_icosphere(3)


@pytest.fixture(scope="session")
def sphere4():
    return gen_icosphere(4)


@pytest.fixture(scope="session")
def square_torus16():
    return gen_flat_torus(SQUARE, 16, 16)


@pytest.fixture(scope="session")
def eq_torus16():
    return gen_flat_torus(EQUILATERAL, 16, 16)
