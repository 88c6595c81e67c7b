import numpy as np
import pytest

from tridesign import Design, DomainError, Interval, InvalidDesignError, NumericError
from tridesign.linalg import is_psd, min_eig, pinv, spd_factor, spd_inverse
from tridesign.quadrature import integrate, integrate_outer
from tridesign.errors import SingularModelError


def test_integrate_polynomial_exact():
    assert integrate(lambda t: t ** 5, 0.0, 2.0) == pytest.approx(64 / 6, rel=1e-14)


def test_integrate_oscillatory():
    val = integrate(lambda t: np.sin(40 * t), 0.0, 3.0)
    assert val == pytest.approx((1 - np.cos(120)) / 40, abs=1e-12)


def test_integrate_vector_valued():
    val = integrate(lambda t: np.stack([t, t ** 2]), 1.0, 2.0)
    np.testing.assert_allclose(val, [1.5, 7 / 3], rtol=1e-14)


def test_integrate_kink():
    assert integrate(lambda t: np.abs(t - 0.3), 0.0, 1.0) == pytest.approx(0.045 + 0.245, abs=1e-12)


def test_integrate_outer():
    G = integrate_outer(lambda t: np.stack([np.ones_like(t), t]), 0.0, 1.0)
    np.testing.assert_allclose(G, [[1, 0.5], [0.5, 1 / 3]], rtol=1e-14)


def test_integrate_nonfinite_raises():
    with np.errstate(divide="ignore"), pytest.raises(NumericError):
        integrate(lambda t: 1 / (t - 0.5) ** 2, 0.0, 1.0)


def test_interval_validation():
    with pytest.raises(DomainError):
        Interval(2, 1)
    with pytest.raises(DomainError):
        Interval(0, np.inf)
    iv = Interval(1, 3)
    assert iv.length == 2 and iv.contains([1, 2.5, 3]) and not iv.contains(3.1)


def test_design_validation():
    with pytest.raises(InvalidDesignError):
        Design([1.0])
    with pytest.raises(InvalidDesignError):
        Design([1.0, 1.0, 2.0])
    with pytest.raises(InvalidDesignError):
        Design([1.0, np.nan])
    d = Design([1, 1.5, 2])
    assert d.n == 3 and list(d) == [1, 1.5, 2]
    with pytest.raises(ValueError):
        d.points[0] = 0.0


def test_design_span_and_spacing():
    d = Design([1, 1.5, 1.9])
    with pytest.raises(InvalidDesignError):
        d.check_span(Interval(1, 2))
    close = Design([1, 1 + 1e-12, 2])
    with pytest.raises(InvalidDesignError):
        close.check_spacing(Interval(1, 2))


def test_spd_helpers():
    A = np.array([[4.0, 1.0], [1.0, 3.0]])
    np.testing.assert_allclose(spd_inverse(A) @ A, np.eye(2), atol=1e-14)
    with pytest.raises(SingularModelError):
        spd_factor(np.array([[1.0, 1.0], [1.0, 1.0]]))
    P = pinv(np.array([[1.0, 1.0], [1.0, 1.0]]))
    np.testing.assert_allclose(P, np.full((2, 2), 0.25))
    assert is_psd(np.zeros((2, 2)))
    assert min_eig(np.diag([2.0, -1.0])) == pytest.approx(-1.0)
