"""Discrete approximation of the continuous BLUE from ``n`` observations.

The estimator is

    theta_n = C^{-1} { sum_{i>=2} mu_i (Y_{t_i} - Y_{t_{i-1}}) + f(a) Y_a / a }

with vector weights ``mu_i``.  It is unbiased iff ``sum mu_i (f(t_i) - f(t_{i-1}))^T = M``
where ``M = int f' f'^T``; the weights ``mu_i = M B^{-1} (f(t_i) - f(t_{i-1})) / (t_i - t_{i-1})``
minimise its mean squared distance to the continuous BLUE in the Loewner order.

All formulas here assume Brownian-motion errors.  Other triangular kernels go
through :func:`star_estimator`, which works in Doob-transformed time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve

from .basis import RegressionBasis
from .continuous_blue import ContinuousBlue, SignedMeasure, c_matrix
from .domain import Design, Interval
from .errors import (CapabilityError, InfeasibleUnbiasednessError, InvalidBasisError,
                     InvalidInputError, SingularModelError, SingularWeightsError)
from .kernel import TriangularKernel, doob_transform, map_design_forward
from .linalg import pinv, spd_factor, spd_inverse, symmetrize

UNBIASED_RTOL = 1e-9
BOUND_GRID = 1001


@dataclass(frozen=True, eq=False)
class LinearEstimator:
    """Increment-weighted estimator; all quantities live in Brownian (working) time.

    ``design`` holds the observation times in the original time scale;
    ``points`` the same times after the Doob transform (identical for Brownian
    motion) and ``obs_scale`` the factors ``1 / v(t_i)`` applied to the data.
    """

    design: Design
    points: np.ndarray
    weights: np.ndarray
    c_inv: np.ndarray
    C: np.ndarray
    M: np.ndarray
    B: np.ndarray
    f_a: np.ndarray
    obs_scale: np.ndarray
    used_pinv: bool = False
    unbiased: bool = True
    kernel_kind: str = "brownian"
    increments: np.ndarray = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return self.c_inv.shape[0]

    @property
    def n(self) -> int:
        return self.points.size

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def gammas(self) -> np.ndarray:
        return self.weights * np.sqrt(self.spacings)[:, None]

    @property
    def betas(self) -> np.ndarray:
        return self.increments / np.sqrt(self.spacings)[:, None]

    def observation_weights(self) -> np.ndarray:
        """Rows ``w_i`` with ``theta_n = sum_i w_i Y_{t_i}`` on the original data, shape (n, m)."""
        mu = self.weights
        w = np.zeros((self.n, self.m))
        w[0] = self.f_a / self.points[0] - mu[0]
        w[1:-1] = mu[:-1] - mu[1:]
        w[-1] = mu[-1]
        return (w @ self.c_inv.T) * self.obs_scale[:, None]

    def unbiasedness_residual(self) -> float:
        S = self.weights.T @ self.increments
        return float(np.max(np.abs(S - self.M)) / max(1.0, np.max(np.abs(self.M))))

    def mse_matrix(self, theta=None) -> np.ndarray:
        """``E[(theta_BLUE - theta_n)(...)^T]`` for arbitrary weights.

        The bias contribution needs the true ``theta``; it vanishes for
        unbiased weights and is ignored when ``theta`` is ``None``.
        """
        mu, dF, dt = self.weights, self.increments, self.spacings
        S = mu.T @ dF
        core = self.M - S - S.T + (mu * dt[:, None]).T @ mu
        if theta is not None:
            D = (self.M - S) @ np.asarray(theta, dtype=float)
            core = core + np.outer(D, D)
        return symmetrize(self.c_inv @ core @ self.c_inv)

    def variance(self) -> np.ndarray:
        """``Var(theta_n) = C^{-1} + MSE`` (valid for unbiased weights)."""
        return symmetrize(self.c_inv + self.mse_matrix())

    def as_measure(self) -> SignedMeasure:
        """Discrete signed measure in working time (data divided by ``v``)."""
        w = self.observation_weights() / self.obs_scale[:, None]
        return SignedMeasure(Interval(self.points[0], self.points[-1]), self.points, w.T)

    def to_json(self) -> dict:
        return {"design": self.design.points.tolist(), "weights": self.weights.tolist(),
                "C_inv": self.c_inv.tolist(), "used_pinv": self.used_pinv,
                "kernel": self.kernel_kind}


def _increments(basis: RegressionBasis, points: np.ndarray):
    F = basis.f(points).T
    return np.diff(F, axis=0), np.diff(points)


def _check_design(design: Design, interval: Interval) -> None:
    design.check_span(interval)
    design.check_spacing(interval)


def _blue(basis, interval, blue: Optional[ContinuousBlue]) -> ContinuousBlue:
    return blue if blue is not None else c_matrix(basis, interval)


def _build(basis, design, interval, blue, weights, B, used_pinv, dF, unbiased=True):
    return LinearEstimator(design=design, points=design.points, weights=weights,
                           c_inv=blue.C_inv, C=blue.C, M=blue.M, B=B,
                           f_a=basis.f(interval.a), obs_scale=np.ones(design.n),
                           used_pinv=used_pinv, unbiased=unbiased, increments=dF)


def _scalar_sum(basis, design):
    dF, dt = _increments(basis, design.points)
    return float(np.sum(dF[:, 0] ** 2 / dt)), dF, dt


def optimal_weights_1d(basis: RegressionBasis, design: Design, interval: Interval,
                       blue: Optional[ContinuousBlue] = None) -> LinearEstimator:
    """Scalar optimal weights ``mu_i = kappa (f(t_i) - f(t_{i-1})) / (t_i - t_{i-1})``."""
    if basis.m != 1:
        raise InvalidBasisError("optimal_weights_1d needs a one-parameter basis")
    _check_design(design, interval)
    blue = _blue(basis, interval, blue)
    s, dF, dt = _scalar_sum(basis, design)
    if s <= 0:
        raise SingularWeightsError("all increments of f vanish on this design")
    kappa = float(blue.M[0, 0]) / s
    weights = kappa * dF / dt[:, None]
    return _build(basis, design, interval, blue, weights, np.array([[s]]), False, dF)


def phi_criterion(basis: RegressionBasis, design: Design, interval: Interval,
                  blue: Optional[ContinuousBlue] = None) -> float:
    """``int f'^2 / sum (f(t_i) - f(t_{i-1}))^2 / (t_i - t_{i-1}) - 1`` (non-negative)."""
    if basis.m != 1:
        raise InvalidBasisError("phi_criterion needs a one-parameter basis")
    _check_design(design, interval)
    blue = _blue(basis, interval, blue)
    s, _, _ = _scalar_sum(basis, design)
    if s <= 0:
        raise SingularWeightsError("all increments of f vanish on this design")
    return float(blue.M[0, 0]) / s - 1.0


def efficiency_1d(basis: RegressionBasis, design: Design, interval: Interval,
                  blue: Optional[ContinuousBlue] = None) -> float:
    blue = _blue(basis, interval, blue)
    phi = phi_criterion(basis, design, interval, blue)
    fa = float(basis.f(interval.a)[0])
    integral = float(blue.M[0, 0])
    return 1.0 / (1.0 + phi / (1.0 + fa * fa / interval.a / integral))


def phi_upper_bound(basis: RegressionBasis, design: Design, interval: Interval,
                    blue: Optional[ContinuousBlue] = None) -> float:
    """Worst-case bound on ``phi`` from the largest spacing and the sizes of ``f'``, ``f''``.

    ``max |f'|`` and ``max |f''|`` are taken on a 1001-point grid.  Returns 0
    when ``f'' == 0`` (then ``phi == 0`` exactly).
    """
    if basis.m != 1:
        raise InvalidBasisError("phi_upper_bound needs a one-parameter basis")
    if not basis.has_second:
        raise CapabilityError("phi_upper_bound needs an analytic second derivative")
    blue = _blue(basis, interval, blue)
    grid = interval.grid(BOUND_GRID)
    max_d = float(np.max(np.abs(basis.df(grid))))
    max_dd = float(np.max(np.abs(basis.ddf(grid))))
    if max_dd == 0.0 or max_d == 0.0:
        return 0.0
    H = float(blue.M[0, 0]) / (2.0 * max_d * max_dd)
    spread = (design.n - 1) * float(np.max(design.spacings)) ** 2
    # A <= (n-1)G alone only yields spread / (H - spread) (when H > spread);
    # the reference criterion uses the smaller spread / (H + spread).
    return spread / (H + spread)


def _b_matrix(dF, dt):
    return symmetrize((dF / dt[:, None]).T @ dF)


def optimal_weights_multi(basis: RegressionBasis, design: Design, interval: Interval,
                          blue: Optional[ContinuousBlue] = None,
                          require_unbiased: bool = True) -> LinearEstimator:
    """Loewner-optimal vector weights ``mu_i = M B^{-1} (f(t_i) - f(t_{i-1})) / (t_i - t_{i-1})``.

    A singular ``B`` falls back to its Moore-Penrose inverse (``used_pinv``).
    If the resulting weights still violate unbiasedness an
    :class:`InfeasibleUnbiasednessError` is raised, unless
    ``require_unbiased=False``, in which case the estimator is returned
    flagged with ``unbiased=False``.
    """
    _check_design(design, interval)
    blue = _blue(basis, interval, blue)
    dF, dt = _increments(basis, design.points)
    B = _b_matrix(dF, dt)
    used_pinv = False
    try:
        B_inv = spd_inverse(B, "B")
    except SingularModelError:
        B_inv = pinv(B)
        used_pinv = True
    weights = (dF / dt[:, None]) @ B_inv @ blue.M.T
    est = _build(basis, design, interval, blue, weights, B, used_pinv, dF)
    if est.unbiasedness_residual() > UNBIASED_RTOL:
        if require_unbiased:
            raise InfeasibleUnbiasednessError(
                f"no unbiased weights exist for n={design.n}, m={basis.m} on this design")
        est = _build(basis, design, interval, blue, weights, B, used_pinv, dF, unbiased=False)
    return est


def check_unbiased(estimator: LinearEstimator, rtol: float = UNBIASED_RTOL) -> bool:
    return estimator.unbiasedness_residual() <= rtol


def mse_trace(estimator: LinearEstimator) -> float:
    """Trace of the mean squared difference to the continuous BLUE."""
    return float(np.trace(estimator.mse_matrix()))


def mse_star_trace(basis: RegressionBasis, points, blue: ContinuousBlue) -> float:
    """``tr{-C^{-1} M C^{-1} + C^{-1} M B^{-1} M C^{-1}}`` straight from the design points.

    The design-search objective; raises :class:`SingularModelError` when ``B`` is singular.
    """
    dF, dt = _increments(basis, np.asarray(points, dtype=float))
    factor = spd_factor(_b_matrix(dF, dt), "B")
    G = blue.C_inv @ blue.M
    term = G @ cho_solve(factor, G.T)
    return float(np.trace(term) - np.trace(G @ blue.C_inv))


def efficiency_multi(estimator: LinearEstimator) -> float:
    """``tr(C^{-1}) / tr(Var(theta_n))``."""
    return float(np.trace(estimator.c_inv) / np.trace(estimator.variance()))


def apply_estimator(estimator: LinearEstimator, observations) -> np.ndarray:
    """Evaluate the estimator on an n-vector or an (n, r) matrix of replicates.

    Returns an m-vector or an (m, r) matrix.
    """
    Y = np.asarray(observations, dtype=float)
    if Y.shape[0] != estimator.n:
        raise InvalidInputError(f"expected {estimator.n} observations, got {Y.shape[0]}")
    return estimator.observation_weights().T @ Y


def star_estimator(basis: RegressionBasis, kernel: TriangularKernel, design: Design,
                   interval: Interval, require_unbiased: bool = True) -> LinearEstimator:
    """Optimal-weight estimator for any triangular kernel via the Doob transform."""
    model = doob_transform(basis, kernel, interval)
    design.check_span(interval)
    work = map_design_forward(model, design)
    pts = work.points.copy()
    pts[0], pts[-1] = model.interval.a, model.interval.b
    work = Design(pts)
    blue = c_matrix(model.basis, model.interval)
    if basis.m == 1:
        est = optimal_weights_1d(model.basis, work, model.interval, blue)
    else:
        est = optimal_weights_multi(model.basis, work, model.interval, blue, require_unbiased)
    scale = 1.0 / kernel.v(design.points)
    return LinearEstimator(design=design, points=work.points, weights=est.weights, c_inv=est.c_inv,
                           C=est.C, M=est.M, B=est.B, f_a=est.f_a, obs_scale=np.asarray(scale, dtype=float),
                           used_pinv=est.used_pinv, unbiased=est.unbiased, kernel_kind=kernel.kind,
                           increments=est.increments)
