import math

import pytest

from layerpot.surfaces import Sphere, make_surface
from layerpot.surface_quadrature import generate_nodes

THETA = math.radians(70.0)


@pytest.fixture(scope="session")
def sphere():
    return Sphere(1.0)


@pytest.fixture(scope="session")
def sphere_nodes(sphere):
    # N = 48 on the default box
    return generate_nodes(sphere, 2.2 / 48, THETA, 1.1)


@pytest.fixture(scope="session")
def ellipsoid():
    return make_surface("rot-ellipsoid")
