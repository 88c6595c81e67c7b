"""Best linear unbiased estimation from a fully observed trajectory.

With Brownian errors on ``[a, b]``, ``a > 0``, the BLUE is
``C^{-1} (int f'(t) dY_t + f(a) Y_a / a)`` with variance ``C^{-1}`` where
``C = int f' f'^T dt + f(a) f(a)^T / a``.  The ``a = 0`` cases are handled by
three explicit functions (no intercept with ``f(0) != 0``, ``f(0) = 0``, and
an intercept component).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .basis import RegressionBasis, derivative_gram, gram_rank
from .domain import Interval
from .errors import CapabilityError, DomainError, InvalidBasisError, SingularModelError
from .kernel import TriangularKernel
from .linalg import spd_inverse, symmetrize
from .quadrature import integrate

FD_REL_STEP = 1e-5


@dataclass(frozen=True)
class SignedMeasure:
    """Vector measure ``sum_k masses[:, k] delta_{points[k]} + density(t) dt`` on ``interval``.

    The estimator it represents is ``int Y_t G(dt)``.
    """

    interval: Interval
    points: np.ndarray
    masses: np.ndarray
    density: Optional[Callable] = None

    @property
    def m(self) -> int:
        return self.masses.shape[0]

    def integrate(self, g) -> np.ndarray:
        """``int g(t) G(dt)`` for a scalar function ``g``; returns an m-vector."""
        total = self.masses @ np.asarray(g(self.points), dtype=float)
        if self.density is not None:
            total = total + integrate(lambda s: self.density(s) * g(s),
                                      self.interval.a, self.interval.b)
        return total

    def apply(self, path) -> np.ndarray:
        """Estimate from a callable trajectory ``path(t)``."""
        return self.integrate(path)


@dataclass(frozen=True)
class ContinuousBlue:
    C: Optional[np.ndarray]
    C_inv: np.ndarray
    degenerate_kind: str = "none"
    M: Optional[np.ndarray] = None
    y0_coefficient: Optional[np.ndarray] = None
    measure: Optional[SignedMeasure] = None

    @property
    def variance(self) -> np.ndarray:
        return self.C_inv

    def to_json(self) -> dict:
        out = {"C": None if self.C is None else self.C.tolist(),
               "C_inv": self.C_inv.tolist(),
               "degenerate_kind": self.degenerate_kind}
        if self.y0_coefficient is not None:
            out["y0_coefficient"] = self.y0_coefficient.tolist()
        return out


@dataclass(frozen=True)
class InterceptBlue:
    """Covariance structure when the model contains an intercept and ``a = 0``."""

    intercept_index: int
    var_tilde: np.ndarray
    var_theta1: float
    cov_row: np.ndarray
    covariance: np.ndarray
    degenerate_kind: str = field(default="intercept")

    def to_json(self) -> dict:
        return {"C": None, "C_inv": self.covariance.tolist(), "degenerate_kind": self.degenerate_kind,
                "intercept_index": self.intercept_index, "var_tilde": self.var_tilde.tolist(),
                "var_theta1": self.var_theta1, "cov_row": self.cov_row.tolist()}


def _require_positive_start(interval: Interval) -> None:
    if interval.a <= 0:
        raise DomainError(f"a = {interval.a} <= 0: use the degenerate_* functions")


def c_matrix(basis: RegressionBasis, interval: Interval) -> ContinuousBlue:
    """``C`` and ``Var(BLUE) = C^{-1}`` for Brownian errors on ``[a, b]``, ``a > 0``."""
    _require_positive_start(interval)
    M = derivative_gram(basis, interval)
    fa = basis.f(interval.a)
    C = symmetrize(M + np.outer(fa, fa) / interval.a)
    return ContinuousBlue(C, spd_inverse(C, "C"), "none", M=M)


def blue_general_kernel(basis: RegressionBasis, kernel: TriangularKernel,
                        interval: Interval) -> ContinuousBlue:
    """``C`` for an arbitrary triangular kernel, integrated directly in original time."""
    kernel.validate(interval)
    ua, va = float(kernel.u(interval.a)), float(kernel.v(interval.a))
    if ua == 0:
        raise DomainError("u(a) = 0: the observation at a is error-free; use the degenerate_* functions")

    def integrand(t):
        v = kernel.v(t)
        h = basis.df(t) * v - kernel.v_dot(t) * basis.f(t)
        return h[:, None, :] * h[None, :, :] / (v * v * kernel.wronskian(t))

    M = integrate(integrand, interval.a, interval.b)
    fa = basis.f(interval.a)
    C = symmetrize(M + np.outer(fa, fa) / (ua * va))
    return ContinuousBlue(C, spd_inverse(C, "C"), "none", M=M)


def _kernel_second(kernel: TriangularKernel, t, h: float, allow_fd: bool):
    if kernel.has_second:
        return kernel.v_ddot(t), kernel.wronskian_dot(t)
    if not allow_fd:
        raise CapabilityError(f"{kernel.kind} kernel lacks second derivatives")
    v_ddot = (kernel.v_dot(t + h) - kernel.v_dot(t - h)) / (2 * h)
    w_dot = (kernel.wronskian(t + h) - kernel.wronskian(t - h)) / (2 * h)
    return v_ddot, w_dot


def signed_measure(basis: RegressionBasis, kernel: TriangularKernel, interval: Interval,
                   C_inv: Optional[np.ndarray] = None, allow_fd: bool = True) -> SignedMeasure:
    """Point masses at ``a``, ``b`` and density representing the continuous BLUE.

    Second derivatives of ``f``, ``u``, ``v`` are analytic when supplied and
    otherwise central differences with step ``(b - a) * 1e-5``.
    """
    a, b = interval.a, interval.b
    if C_inv is None:
        C_inv = blue_general_kernel(basis, kernel, interval).C_inv
    h = interval.length * FD_REL_STEP
    if not basis.has_second and not allow_fd:
        raise CapabilityError("basis lacks second derivatives and finite differences are disabled")

    def g(t):
        # coefficient of d(Y_t / v(t)) in the stochastic-integral form
        return (basis.df(t) * kernel.v(t) - kernel.v_dot(t) * basis.f(t)) / kernel.wronskian(t)

    ua = float(kernel.u(a))
    mass_a = C_inv @ ((basis.f(a) * kernel.u_dot(a) - basis.df(a) * ua)
                      / (ua * kernel.wronskian(a)))
    mass_b = C_inv @ (g(b) / kernel.v(b))

    def density(t):
        t = np.asarray(t, dtype=float)
        v, vd = kernel.v(t), kernel.v_dot(t)
        v_dd, w_dot = _kernel_second(kernel, t, h, allow_fd)
        w = kernel.wronskian(t)
        f, fd = basis.f(t), basis.df(t)
        fdd = basis.ddf(t, fd_step=h)
        hh = fd * v - vd * f
        g_dot = ((fdd * v - v_dd * f) * w - hh * w_dot) / w ** 2
        return -(C_inv @ g_dot) / v

    return SignedMeasure(interval, np.array([a, b]), np.column_stack([mass_a, mass_b]), density)


def verify_blue_condition(measure: SignedMeasure, kernel: TriangularKernel, C_inv: np.ndarray,
                          basis: RegressionBasis, grid) -> float:
    """Max-norm residual of ``int K(s, t) G(ds) - C_inv f(t)`` over ``grid``.

    A zero residual characterises the BLUE among unbiased estimators ``int Y dG``.
    """
    a, b = measure.interval.a, measure.interval.b
    worst = 0.0
    for t in np.asarray(grid, dtype=float).ravel():
        lhs = measure.masses @ kernel(measure.points, t)
        if measure.density is not None:
            def integrand(s, t=t):
                return measure.density(s) * kernel(s, t)
            if t > a:
                lhs = lhs + integrate(integrand, a, t)
            if t < b:
                lhs = lhs + integrate(integrand, t, b)
        resid = lhs - C_inv @ basis.f(t)
        worst = max(worst, float(np.max(np.abs(resid))))
    return worst


def _require_zero_start(interval: Interval) -> None:
    if interval.a != 0:
        raise DomainError(f"degenerate formulas need a = 0, got a = {interval.a}")


def _degenerate_measure(basis, interval, var, y0_coef):
    if not basis.has_second:
        return None
    b = interval.b
    mass_0 = y0_coef - var @ basis.df(0.0)
    mass_b = var @ basis.df(b)
    return SignedMeasure(interval, np.array([0.0, b]), np.column_stack([mass_0, mass_b]),
                         lambda t: -(var @ basis.ddf(t)))


def degenerate_no_intercept(basis: RegressionBasis, interval: Interval) -> ContinuousBlue:
    """``a = 0``, constant not in the span, ``f(0) != 0``: the limit of ``C_a^{-1}``."""
    _require_zero_start(interval)
    rank = gram_rank(basis, interval)
    if rank.has_intercept:
        raise InvalidBasisError("basis contains an intercept: use degenerate_intercept")
    f0 = basis.f(0.0)
    if np.max(np.abs(f0)) <= 1e-14:
        raise InvalidBasisError("f(0) = 0: use degenerate_f0_zero")
    M0 = derivative_gram(basis, interval)
    M0_inv = spd_inverse(M0, "M_0")
    g = M0_inv @ f0
    denom = float(f0 @ g)
    var = symmetrize(M0_inv - np.outer(g, g) / denom)
    y0 = g / denom
    return ContinuousBlue(None, var, "no_intercept_f0_nonzero", M=M0, y0_coefficient=y0,
                          measure=_degenerate_measure(basis, interval, var, y0))


def degenerate_f0_zero(basis: RegressionBasis, interval: Interval) -> ContinuousBlue:
    """``a = 0`` and ``f(0) = 0``: the observation at 0 carries no information."""
    _require_zero_start(interval)
    f0 = basis.f(0.0)
    if np.max(np.abs(f0)) > 1e-14:
        raise InvalidBasisError("f(0) != 0: use degenerate_no_intercept")
    M0 = derivative_gram(basis, interval)
    var = spd_inverse(M0, "M_0")
    y0 = np.zeros(basis.m)
    return ContinuousBlue(None, var, "f0_zero", M=M0, y0_coefficient=y0,
                          measure=_degenerate_measure(basis, interval, var, y0))


def _constant_components(basis: RegressionBasis, interval: Interval) -> list:
    grid = interval.grid(101)
    d = basis.df(grid)
    f = basis.f(grid)
    return [i for i in range(basis.m)
            if np.all(d[i] == 0) and np.ptp(f[i]) == 0 and f[i][0] != 0]


def degenerate_intercept(basis: RegressionBasis, interval: Interval) -> InterceptBlue:
    """``a = 0`` with a constant component: ``Y_0`` pins the intercept without error.

    The remaining parameters are estimated from ``Y_t - Y_0`` with the shifted
    basis ``f~(t) - f~(0)``, which vanishes at 0.
    """
    _require_zero_start(interval)
    consts = _constant_components(basis, interval)
    rank = gram_rank(basis, interval).rank
    if rank < basis.m - 1:
        raise SingularModelError("more than one constant direction in the basis")
    if len(consts) != 1:
        raise InvalidBasisError("expected exactly one constant component")
    k = consts[0]
    level = float(basis.f(0.0)[k])
    rest = [i for i in range(basis.m) if i != k]
    tilde = basis.subset(rest)
    var_tilde = spd_inverse(derivative_gram(tilde, interval), "M~_0")
    f0 = tilde.f(0.0)
    # theta_1 = (Y_0 - theta~^T f~(0)) / level
    g = var_tilde @ f0
    var_theta1 = float(f0 @ g) / level ** 2
    cov_row = -g / level
    order = [k] + rest
    block = np.zeros((basis.m, basis.m))
    block[0, 0] = var_theta1
    block[0, 1:] = cov_row
    block[1:, 0] = cov_row
    block[1:, 1:] = var_tilde
    cov = np.empty_like(block)
    cov[np.ix_(order, order)] = block
    return InterceptBlue(k, var_tilde, var_theta1, cov_row, cov)
