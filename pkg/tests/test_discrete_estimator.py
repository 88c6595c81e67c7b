import dataclasses

import numpy as np
import pytest

from tridesign import (Design, InfeasibleUnbiasednessError, Interval, InvalidBasisError,
                       InvalidDesignError, InvalidInputError, apply_estimator, brownian, c_matrix,
                       check_unbiased, covariance_matrix, efficiency_1d, efficiency_multi,
                       equidistant_design, exponential, mse_star_trace, mse_trace,
                       optimal_weights_1d, optimal_weights_multi, phi_criterion, phi_upper_bound,
                       polynomial_basis, star_estimator, trig_basis, affine_shift)


def phi_t2_closed(a, b, n):
    return (a - b) ** 3 / (4 * (n - 1) ** 2 * (a ** 3 - b ** 3) - (a - b) ** 3)


def eff_t2_closed(a, b, n):
    P, Q = (a - b) ** 3, 4 * (n - 1) ** 2 * (a ** 3 - b ** 3)
    return 1 - 4 * P * (b ** 3 - a ** 3) / (Q * (4 * b ** 3 - a ** 3) - 3 * P * a ** 3)


def eff_t3_closed(a, b, n):
    K = (a - b) ** 2 * (5 * (n - 1) ** 2 * (a ** 3 - b ** 3) - (a - b) ** 3)
    D = 9 * (9 * b ** 5 - 4 * a ** 5) * (a ** 5 - b ** 5) * (n - 1) ** 4
    return 1 - 9 * (b ** 5 - a ** 5) * K / (D - 5 * a ** 5 * K)


CASES = [(1, 2, 5), (1, 2, 10), (0.5, 3, 7)]


def test_weights_linear_are_one(unit12, rng):
    b = polynomial_basis([1])
    pts = np.concatenate([[1], np.sort(rng.uniform(1, 2, 5)), [2]])
    est = optimal_weights_1d(b, Design(pts), unit12)
    np.testing.assert_allclose(est.weights, 1.0, rtol=1e-13)
    assert phi_criterion(b, Design(pts), unit12) == pytest.approx(0.0, abs=1e-14)
    assert efficiency_1d(b, Design(pts), unit12) == pytest.approx(1.0)


def test_weights_quadratic_three_points(unit12):
    est = optimal_weights_1d(polynomial_basis([2]), Design([1, 1.5, 2]), unit12)
    kappa = (28 / 3) / 9.25
    np.testing.assert_allclose(est.weights[:, 0], [kappa * 2.5, kappa * 3.5], rtol=1e-13)
    assert est.unbiasedness_residual() < 1e-12


def test_1d_rejects_multi(unit12, cubic):
    with pytest.raises(InvalidBasisError):
        optimal_weights_1d(cubic, equidistant_design(5, unit12), unit12)


@pytest.mark.parametrize("a,b,n", CASES)
def test_phi_quadratic_closed_form(a, b, n):
    iv = Interval(a, b)
    phi = phi_criterion(polynomial_basis([2]), equidistant_design(n, iv), iv)
    assert phi == pytest.approx(phi_t2_closed(a, b, n), rel=1e-12, abs=1e-12)


def test_phi_value_447(unit12):
    assert phi_criterion(polynomial_basis([2]), equidistant_design(5, unit12), unit12) == pytest.approx(1 / 447)


@pytest.mark.parametrize("a,b,n", CASES)
def test_efficiency_closed_forms(a, b, n):
    iv = Interval(a, b)
    d = equidistant_design(n, iv)
    assert efficiency_1d(polynomial_basis([2]), d, iv) == pytest.approx(eff_t2_closed(a, b, n), abs=1e-12)
    assert efficiency_1d(polynomial_basis([3]), d, iv) == pytest.approx(eff_t3_closed(a, b, n), abs=1e-12)


def test_efficiency_quadratic_fraction(unit12):
    eff = efficiency_1d(polynomial_basis([2]), equidistant_design(5, unit12), unit12)
    assert eff == pytest.approx(13857 / 13885, abs=1e-13)


def test_efficiency_shifted_quadratic(unit12):
    b = affine_shift(polynomial_basis([2]), -0.5)
    eff = efficiency_1d(b, equidistant_design(5, unit12), unit12)
    assert eff == pytest.approx(0.99782596, abs=1e-8)


def test_phi_rate():
    iv = Interval(1, 2)
    ns = np.array([5, 10, 20, 40, 80])
    phis = [phi_criterion(polynomial_basis([2]), equidistant_design(n, iv), iv) for n in ns]
    assert np.all(np.diff(phis) < 0)
    slope = np.polyfit(np.log(ns), np.log(phis), 1)[0]
    assert -2.2 <= slope <= -1.8


def test_phi_upper_bound(unit12):
    b = polynomial_basis([2])
    d = equidistant_design(5, unit12)
    bound = phi_upper_bound(b, d, unit12)
    assert bound == pytest.approx(0.3, rel=1e-12)
    assert phi_criterion(b, d, unit12) <= bound
    assert phi_upper_bound(polynomial_basis([1]), d, unit12) == 0.0


def test_phi_nonnegative(unit12, rng):
    for powers in ([2], [3], [4]):
        b = polynomial_basis(powers)
        for _ in range(20):
            pts = np.concatenate([[1], np.sort(rng.uniform(1, 2, 4)), [2]])
            assert phi_criterion(b, Design(pts), unit12) >= -1e-14


def test_multi_reduces_to_scalar(unit12, rng):
    b = polynomial_basis([2])
    pts = np.concatenate([[1], np.sort(rng.uniform(1, 2, 5)), [2]])
    one = optimal_weights_1d(b, Design(pts), unit12)
    multi = optimal_weights_multi(b, Design(pts), unit12)
    np.testing.assert_allclose(multi.weights, one.weights, rtol=1e-12)


def test_multi_unbiasedness_identity(unit12, cubic):
    est = optimal_weights_multi(cubic, equidistant_design(5, unit12), unit12)
    S = est.weights.T @ est.increments
    np.testing.assert_allclose(S, est.M, atol=1e-10 * np.abs(est.M).max())
    assert check_unbiased(est) and not est.used_pinv


def test_singular_b_infeasible(unit12, cubic):
    d = Design([1.0, 2.0])
    with pytest.raises(InfeasibleUnbiasednessError):
        optimal_weights_multi(cubic, d, unit12)
    est = optimal_weights_multi(cubic, d, unit12, require_unbiased=False)
    assert est.used_pinv and not est.unbiased


def test_singular_b_pseudo_inverse_feasible(unit12):
    # (1, t): B has rank 1 but the constant contributes nothing to M either
    b = polynomial_basis([0, 1])
    est = optimal_weights_multi(b, equidistant_design(4, unit12), unit12)
    assert est.used_pinv and est.unbiased
    theta = np.array([0.7, -1.3])
    Y = theta @ b.f(est.design.points)
    np.testing.assert_allclose(apply_estimator(est, Y), theta, atol=1e-10)


def test_mse_trace_linear_zero(unit12, rng):
    b = polynomial_basis([1])
    pts = np.concatenate([[1], np.sort(rng.uniform(1, 2, 3)), [2]])
    assert abs(mse_trace(optimal_weights_1d(b, Design(pts), unit12))) < 1e-15


def test_mse_trace_scalar_identity(unit12):
    est = optimal_weights_1d(polynomial_basis([2]), equidistant_design(5, unit12), unit12)
    expected = (3 / 31) ** 2 * (28 / 3) * (1 / 447)
    assert mse_trace(est) == pytest.approx(expected, rel=1e-12)


def test_mse_star_trace_matches_matrix(unit12, cubic, rng):
    blue = c_matrix(cubic, unit12)
    for _ in range(5):
        pts = np.concatenate([[1], np.sort(rng.uniform(1, 2, 4)), [2]])
        est = optimal_weights_multi(cubic, Design(pts), unit12, blue)
        assert mse_star_trace(cubic, pts, blue) == pytest.approx(mse_trace(est), rel=1e-8)


def test_mse_trace_monotone_under_refinement(unit12):
    b = polynomial_basis([2])
    vals = [mse_trace(optimal_weights_1d(b, equidistant_design(2 ** k + 1, unit12), unit12))
            for k in range(1, 7)]
    assert np.all(np.diff(vals) <= 1e-16)


def test_efficiency_multi_examples(unit12, cubic):
    opt = star_estimator(cubic, brownian(), Design([1, 1.444, 1.668, 1.846, 2]), unit12)
    assert 100 * efficiency_multi(opt) == pytest.approx(96.71, abs=0.01)
    uni = star_estimator(cubic, brownian(), equidistant_design(5, unit12), unit12)
    assert 100 * efficiency_multi(uni) == pytest.approx(93.82, abs=0.01)
    lin = optimal_weights_1d(polynomial_basis([1]), equidistant_design(5, unit12), unit12)
    assert efficiency_multi(lin) == pytest.approx(1.0)


def test_loewner_spot_check(unit12, cubic, rng):
    est = optimal_weights_multi(cubic, equidistant_design(5, unit12), unit12)
    dF, dt = est.increments, est.spacings
    B_inv = np.linalg.inv(est.B)
    best = est.mse_matrix()
    for _ in range(50):
        E = rng.normal(size=est.weights.shape) * np.abs(est.weights).mean() * 0.1
        D = E - (dF / dt[:, None]) @ B_inv @ (dF.T @ E)
        other = dataclasses.replace(est, weights=est.weights + D)
        assert other.unbiasedness_residual() < 1e-9
        assert np.linalg.eigvalsh(other.mse_matrix() - best)[0] >= -1e-9


def test_biased_weights_have_bias_term(unit12):
    est = optimal_weights_1d(polynomial_basis([2]), equidistant_design(5, unit12), unit12)
    off = dataclasses.replace(est, weights=est.weights * 1.1)
    assert not check_unbiased(off)
    theta = np.array([2.0])
    assert off.mse_matrix(theta)[0, 0] > off.mse_matrix()[0, 0]
    assert est.mse_matrix(theta)[0, 0] == pytest.approx(est.mse_matrix()[0, 0])


@pytest.mark.parametrize("kernel_name", ["brownian", "exponential"])
@pytest.mark.parametrize("basis", [polynomial_basis([2]), polynomial_basis([1, 2, 3]), trig_basis([1, 2])],
                         ids=["t2", "cubic", "trig2"])
def test_variance_decomposition(basis, kernel_name, unit12, rng):
    kernel = brownian() if kernel_name == "brownian" else exponential(1.0)
    pts = np.concatenate([[1], np.sort(rng.uniform(1.05, 1.95, 4)), [2]])
    est = star_estimator(basis, kernel, Design(pts), unit12)
    W = est.observation_weights()
    direct = W.T @ covariance_matrix(kernel, pts) @ W
    np.testing.assert_allclose(direct, est.variance(), rtol=1e-9, atol=1e-9 * np.abs(direct).max())
    assert np.linalg.eigvalsh(est.variance() - est.c_inv)[0] >= -1e-9


def test_apply_noiseless_recovers_theta(unit12, kernel):
    b = trig_basis([1, 2])
    est = star_estimator(b, kernel, equidistant_design(7, unit12), unit12)
    theta = np.array([1.0, -2.0, 0.5, 3.0])
    Y = theta @ b.f(est.design.points)
    np.testing.assert_allclose(apply_estimator(est, Y), theta, atol=1e-10)
    R = np.column_stack([Y, 2 * Y])
    np.testing.assert_allclose(apply_estimator(est, R), np.column_stack([theta, 2 * theta]), atol=1e-10)


def test_apply_linear_uses_endpoint(unit12, rng):
    b = polynomial_basis([1])
    pts = np.concatenate([[1], np.sort(rng.uniform(1, 2, 3)), [2]])
    est = optimal_weights_1d(b, Design(pts), unit12)
    Y = rng.normal(size=pts.size)
    assert apply_estimator(est, Y)[0] == pytest.approx(Y[-1] / 2)


def test_apply_size_mismatch(unit12):
    est = optimal_weights_1d(polynomial_basis([2]), equidistant_design(5, unit12), unit12)
    with pytest.raises(InvalidInputError):
        apply_estimator(est, np.zeros(4))


def test_design_must_span(unit12):
    with pytest.raises(InvalidDesignError):
        optimal_weights_1d(polynomial_basis([2]), Design([1, 1.5, 1.9]), unit12)


def test_gamma_beta_parameterisation(unit12, cubic):
    est = optimal_weights_multi(cubic, equidistant_design(5, unit12), unit12)
    np.testing.assert_allclose(est.gammas.T @ est.betas, est.weights.T @ est.increments)
    np.testing.assert_allclose(est.betas.T @ est.betas, est.B)
