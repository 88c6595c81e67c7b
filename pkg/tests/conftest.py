import numpy as np
import pytest

from tridesign import Interval, brownian, exponential, polynomial_basis, trig_basis


@pytest.fixture
def unit12():
    return Interval(1.0, 2.0)


@pytest.fixture
def cubic():
    return polynomial_basis([1, 2, 3])


@pytest.fixture
def trig2():
    return trig_basis([1, 2])


@pytest.fixture(params=["brownian", "exponential"])
def kernel(request):
    return brownian() if request.param == "brownian" else exponential(1.0)


def fd5(fn, t, h):
    """Five-point central difference."""
    return (-fn(t + 2 * h) + 8 * fn(t + h) - 8 * fn(t - h) + fn(t - 2 * h)) / (12 * h)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
