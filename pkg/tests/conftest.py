import numpy as np
import pytest

from invprox import Domain, DynamicsMap, QuadratureSpace, parse

# The 2-d benchmark system used throughout: linear in x1, trig/quadratic
# coupling into x2, on the unit box.
DYNAMICS_SOURCES = ["0.9*x1", "0.4*(sin(x2)+x1^2)+0.01*x2^2"]
DICTIONARIES = {
    "S1": ["1", "x1", "x1^2"],
    "S2": ["1", "x1", "x2", "x1^2"],
    "S3": ["1", "x1", "x2", "x1^2", "x2^2"],
}


@pytest.fixture(scope="session")
def box():
    return Domain(((-1.0, 1.0), (-1.0, 1.0)))


@pytest.fixture(scope="session")
def quad(box):
    return QuadratureSpace(box, 20)


@pytest.fixture(scope="session")
def dynamics():
    return DynamicsMap.from_strings(DYNAMICS_SOURCES, 2)


@pytest.fixture(scope="session")
def dictionaries():
    return {
        name: tuple(parse(s, 2) for s in sources)
        for name, sources in DICTIONARIES.items()
    }


def gauss_legendre_2d(f, order, bounds=((-1.0, 1.0), (-1.0, 1.0))):
    """Independent scalar quadrature oracle: plain double sum over a tensor rule."""
    t, w = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for i in range(order):
        (a1, b1), (a2, b2) = bounds
        x = 0.5 * (b1 - a1) * t[i] + 0.5 * (a1 + b1)
        wi = 0.5 * (b1 - a1) * w[i]
        for j in range(order):
            y = 0.5 * (b2 - a2) * t[j] + 0.5 * (a2 + b2)
            wj = 0.5 * (b2 - a2) * w[j]
            total += wi * wj * f(x, y)
    return total
