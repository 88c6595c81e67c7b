import dataclasses

import numpy as np
import pytest

from tridesign import (Design, InvalidInputError, SimulationPlan, batch_means, brownian,
                       decomposition_check, empirical_mse, equidistant_design, exponential,
                       optimal_weights_1d, polynomial_basis, sample_observations, simulate_estimates,
                       star_estimator, wlse_variance)
from tridesign.montecarlo import CHUNK


def test_plan_validation(unit12):
    d = equidistant_design(3, unit12)
    with pytest.raises(InvalidInputError):
        SimulationPlan(polynomial_basis([2]), brownian(), d, [1.0, 2.0], 100)
    with pytest.raises(InvalidInputError):
        SimulationPlan(polynomial_basis([2]), brownian(), d, [1.0], 0)


def test_mean_at_endpoint():
    plan = SimulationPlan(polynomial_basis([1]), brownian(), Design([1.0, 2.0]), [2.0], 100_000, seed=1)
    Y = sample_observations(plan)
    assert abs(Y[1].mean() - 4.0) < 4 * np.sqrt(2 / 1e5)


def test_covariance_of_noise():
    plan = SimulationPlan(polynomial_basis([1]), brownian(), Design([1.0, 2.0]), [0.0], 100_000, seed=2)
    Y = sample_observations(plan)
    outer = Y[:, None, :] * Y[None, :, :]
    mean, se = batch_means(outer)
    assert np.all(np.abs(mean - [[1, 1], [1, 2]]) <= 3 * se)


def test_exponential_noise_covariance(unit12):
    d = equidistant_design(3, unit12)
    plan = SimulationPlan(polynomial_basis([1]), exponential(1.0), d, [0.0], 60_000, seed=5)
    Y = sample_observations(plan)
    mean, se = batch_means(Y[:, None, :] * Y[None, :, :])
    S = exponential(1.0)(d.points[:, None], d.points[None, :])
    assert np.all(np.abs(mean - S) <= 4 * se)


def test_determinism_and_chunking():
    plan = SimulationPlan(polynomial_basis([2]), brownian(), Design([1, 1.5, 2]), [1.0], CHUNK + 123, seed=9)
    A, B = sample_observations(plan), sample_observations(plan)
    np.testing.assert_array_equal(A, B)
    other = sample_observations(dataclasses.replace(plan, seed=10))
    assert not np.array_equal(A, other)
    # a shorter run reproduces the leading chunks of a longer one
    short = sample_observations(dataclasses.replace(plan, replicates=CHUNK))
    np.testing.assert_array_equal(short, A[:, :CHUNK])


def test_batch_means_errors():
    with pytest.raises(InvalidInputError):
        batch_means(np.zeros(5))
    m, se = batch_means(np.arange(40.0))
    assert m == pytest.approx(19.5) and se > 0


def test_star_quadratic_variance(unit12):
    b = polynomial_basis([2])
    d = equidistant_design(5, unit12)
    est = optimal_weights_1d(b, d, unit12)
    plan = SimulationPlan(b, brownian(), d, [1.5], 100_000, seed=11)
    rep = empirical_mse(est, plan)
    res = rep.check(est.variance())
    assert res["bias_ok"] and res["mse_ok"]


def test_biased_weights_detected(unit12):
    b = polynomial_basis([2])
    d = equidistant_design(5, unit12)
    est = optimal_weights_1d(b, d, unit12)
    off = dataclasses.replace(est, weights=est.weights * 1.1)
    plan = SimulationPlan(b, brownian(), d, [3.0], 50_000, seed=4)
    rep = empirical_mse(off, plan)
    assert not rep.check()["bias_ok"]
    assert np.max(rep.bias_z()) > 10


def test_wlse_and_star_multi(unit12, cubic, kernel):
    d = equidistant_design(5, unit12)
    theta = np.array([1.0, -0.5, 0.25])
    plan = SimulationPlan(cubic, kernel, d, theta, 100_000, seed=2016)
    star = star_estimator(cubic, kernel, d, unit12)
    for estimator, theory in ((star, star.variance()),
                              ("wlse", wlse_variance(cubic, kernel, d).variance)):
        res = empirical_mse(estimator, plan).check(theory)
        assert res["bias_ok"] and res["mse_ok"], res


def test_estimator_design_mismatch(unit12):
    b = polynomial_basis([2])
    est = optimal_weights_1d(b, equidistant_design(5, unit12), unit12)
    plan = SimulationPlan(b, brownian(), equidistant_design(4, unit12), [1.0], 100)
    with pytest.raises(InvalidInputError):
        empirical_mse(est, plan)


def test_simulate_estimates_custom(unit12):
    b = polynomial_basis([1])
    plan = SimulationPlan(b, brownian(), equidistant_design(3, unit12), [1.0], 1000, seed=3)
    out = simulate_estimates(plan, {"end": lambda Y: Y[-1] / 2})
    assert out["end"].shape == (1, 1000)


def test_decomposition_against_fine_grid(unit12):
    b = polynomial_basis([2])
    fine = equidistant_design(2001, unit12)
    coarse = equidistant_design(5, unit12)
    est = optimal_weights_1d(b, coarse, unit12)
    ref = optimal_weights_1d(b, fine, unit12)
    plan = SimulationPlan(b, brownian(), fine, [1.0], 20_000, seed=7)
    diff, se = decomposition_check(plan, est, ref)
    assert np.all(np.abs(diff - est.c_inv) <= 3 * se + 1e-6)
