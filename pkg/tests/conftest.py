import numpy as np
import pytest

import koopeig as ke


@pytest.fixture(scope="session")
def lin2d():
    return ke.make_system("lin2d", a1=1.0, a2=2.0)


@pytest.fixture(scope="session")
def horizontal_manifold():
    # x2 = 1 line parameterized by s = x1.
    return ke.segment_manifold((0.3, 1.0), (2.2, 1.0), n=121, s_range=(0.3, 2.2))


@pytest.fixture(scope="session")
def observer_eig(lin2d, horizontal_manifold):
    """phi = x2 built by pullback: h = 1, lambda = a2 = 2, two-sided window."""
    h = ke.DataFunction.from_callable(horizontal_manifold, lambda s: 1.0)
    return ke.OpenEigenfunction(
        2.0, h, horizontal_manifold, lin2d.field, (-0.1, 1.1)
    )


@pytest.fixture(scope="session")
def general_eig(lin2d, horizontal_manifold):
    """phi = x1 * sqrt(x2): h(s) = s with the same eigenvalue."""
    h = ke.DataFunction.from_callable(horizontal_manifold, lambda s: s)
    return ke.OpenEigenfunction(
        2.0, h, horizontal_manifold, lin2d.field, (-0.1, 1.1)
    )


@pytest.fixture(scope="session")
def unit_square_points():
    xs = np.linspace(1.0, 2.0, 10)
    return np.array([[a, b] for a in xs for b in xs])
