"""Triangular covariance kernels ``K(t, t') = u(min) v(max)`` and the Doob transform.

Any such kernel is Brownian motion after the change of time ``q = u / v`` and
the rescaling ``1 / v``.  :func:`doob_transform` builds the regression model in
the new time so that every Brownian-motion formula applies unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .basis import Component, RegressionBasis
from .domain import Design, Interval
from .errors import CapabilityError, DomainError, InvalidDesignError, InvalidKernelError

VALIDATION_GRID = 1001
BISECTION_TOL = 1e-12


@dataclass(frozen=True)
class TriangularKernel:
    u: Callable
    v: Callable
    u_dot: Callable
    v_dot: Callable
    u_ddot: Optional[Callable] = None
    v_ddot: Optional[Callable] = None
    kind: str = "custom"
    lam: Optional[float] = None
    q_inverse: Optional[Callable] = None

    def __call__(self, t, s) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        lo = np.minimum(t, s)
        hi = np.maximum(t, s)
        return np.asarray(self.u(lo) * self.v(hi), dtype=float)

    @property
    def has_second(self) -> bool:
        return self.u_ddot is not None and self.v_ddot is not None

    def q(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.u(t) / self.v(t)

    def wronskian(self, t) -> np.ndarray:
        """``u' v - u v'``; ``q' = wronskian / v^2``."""
        t = np.asarray(t, dtype=float)
        return self.u_dot(t) * self.v(t) - self.u(t) * self.v_dot(t)

    def wronskian_dot(self, t) -> np.ndarray:
        if not self.has_second:
            raise CapabilityError(f"{self.kind} kernel has no second derivatives")
        t = np.asarray(t, dtype=float)
        return self.u_ddot(t) * self.v(t) - self.u(t) * self.v_ddot(t)

    def q_inv(self, x, interval: Interval) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.q_inverse is not None:
            return np.asarray(self.q_inverse(x), dtype=float)
        return _bisect_inverse(self.q, x, interval)

    def validate(self, interval: Interval, n: int = VALIDATION_GRID) -> None:
        """Check positivity of ``u, v`` and strict monotonicity of ``q`` on a grid."""
        grid = interval.grid(n)
        u, v = self.u(grid), self.v(grid)
        if np.any(v == 0) or not np.all(np.isfinite(v)):
            raise InvalidKernelError(f"v vanishes or is not finite on [{interval.a}, {interval.b}]")
        if np.any(u[1:-1] <= 0) or np.any(v[1:-1] <= 0) or u[0] < 0 or u[-1] < 0 or v[0] < 0:
            raise InvalidKernelError("u and v must be positive on the open interval")
        if np.any(np.diff(u / v) <= 0):
            raise InvalidKernelError("q = u/v must be strictly increasing")
        if np.any(self.wronskian(grid) <= 0):
            raise InvalidKernelError("u'v - uv' must be positive on the interval")


def _bisect_inverse(q, x, interval: Interval) -> np.ndarray:
    lo = np.full(x.shape, interval.a)
    hi = np.full(x.shape, interval.b)
    qa, qb = q(interval.a), q(interval.b)
    if np.any(x < qa - 1e-12 * abs(qa)) or np.any(x > qb + 1e-12 * abs(qb)):
        raise DomainError("value outside q([a, b])")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = q(mid) < x
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo) < BISECTION_TOL:
            break
    return 0.5 * (lo + hi)


def brownian() -> TriangularKernel:
    """``K(t, t') = min(t, t')``."""
    return TriangularKernel(
        u=lambda t: np.asarray(t, dtype=float),
        v=lambda t: np.ones_like(np.asarray(t, dtype=float)),
        u_dot=lambda t: np.ones_like(np.asarray(t, dtype=float)),
        v_dot=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        u_ddot=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        v_ddot=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        kind="brownian",
        q_inverse=lambda x: np.asarray(x, dtype=float),
    )


def exponential(lam: float = 1.0) -> TriangularKernel:
    """``K(t, t') = exp(-lam |t - t'|)``, i.e. ``u = e^{lam t}``, ``v = e^{-lam t}``."""
    lam = float(lam)
    if not np.isfinite(lam) or lam <= 0:
        raise InvalidKernelError(f"lambda must be positive, got {lam}")
    return TriangularKernel(
        u=lambda t: np.exp(lam * np.asarray(t, dtype=float)),
        v=lambda t: np.exp(-lam * np.asarray(t, dtype=float)),
        u_dot=lambda t: lam * np.exp(lam * np.asarray(t, dtype=float)),
        v_dot=lambda t: -lam * np.exp(-lam * np.asarray(t, dtype=float)),
        u_ddot=lambda t: lam * lam * np.exp(lam * np.asarray(t, dtype=float)),
        v_ddot=lambda t: lam * lam * np.exp(-lam * np.asarray(t, dtype=float)),
        kind="exponential",
        lam=lam,
        q_inverse=lambda x: np.log(np.asarray(x, dtype=float)) / (2.0 * lam),
    )


def custom(u, v, u_dot, v_dot, u_ddot=None, v_ddot=None) -> TriangularKernel:
    """Kernel from user callables; ``q^{-1}`` is found by bisection."""
    return TriangularKernel(u, v, u_dot, v_dot, u_ddot, v_ddot, kind="custom")


def covariance_matrix(kernel: TriangularKernel, points) -> np.ndarray:
    t = points.points if isinstance(points, Design) else np.asarray(points, dtype=float)
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise InvalidDesignError("covariance points must be strictly increasing")
    if np.any(kernel.v(t) == 0):
        raise InvalidDesignError("v vanishes at a design point")
    return kernel(t[:, None], t[None, :])


@dataclass(frozen=True)
class TransformedModel:
    """Regression model in Brownian time ``q(t)`` with basis ``f(q^{-1}) / v(q^{-1})``."""

    basis: RegressionBasis
    interval: Interval
    kernel: TriangularKernel
    original_interval: Interval

    def back_map(self, x) -> np.ndarray:
        return self.kernel.q_inv(x, self.original_interval)

    def forward_map(self, t) -> np.ndarray:
        return self.kernel.q(t)

    @property
    def is_identity(self) -> bool:
        return self.kernel.kind == "brownian"


def _transformed_component(c: Component, kernel: TriangularKernel, interval: Interval,
                           with_second: bool) -> Component:
    def back(x):
        return kernel.q_inv(x, interval)

    def value(x):
        t = back(x)
        return c.value(t) / kernel.v(t)

    def derivative(x):
        t = back(x)
        v = kernel.v(t)
        return (c.derivative(t) * v - c.value(t) * kernel.v_dot(t)) / kernel.wronskian(t)

    second = None
    if with_second:
        def second(x):
            t = back(x)
            v, vd, vdd = kernel.v(t), kernel.v_dot(t), kernel.v_ddot(t)
            w, wd = kernel.wronskian(t), kernel.wronskian_dot(t)
            g = c.derivative(t) * v - c.value(t) * vd
            g_dot = c.second(t) * v - c.value(t) * vdd
            return (g_dot * w - g * wd) / w ** 2 * v ** 2 / w

    return Component(value, derivative, second, label=f"{c.label}~")


def doob_transform(basis: RegressionBasis, kernel: TriangularKernel,
                   interval: Interval) -> TransformedModel:
    """Reduce a triangular-kernel model on ``[a, b]`` to Brownian errors on ``[q(a), q(b)]``."""
    kernel.validate(interval)
    if kernel.kind == "brownian":
        return TransformedModel(basis, interval, kernel, interval)
    lo, hi = float(kernel.q(interval.a)), float(kernel.q(interval.b))
    with_second = basis.has_second and kernel.has_second
    comps = tuple(_transformed_component(c, kernel, interval, with_second)
                  for c in basis.components)
    return TransformedModel(RegressionBasis(comps, label=f"{basis.label}~{kernel.kind}"),
                            Interval(lo, hi), kernel, interval)


def map_design_forward(model: TransformedModel, design: Design) -> Design:
    if not model.original_interval.contains(design.points, tol=1e-12 * model.original_interval.length):
        raise DomainError("design point outside the original interval")
    if model.is_identity:
        return design
    return Design(model.forward_map(design.points))


def map_design_back(model: TransformedModel, design_tilde: Design) -> Design:
    """Apply ``q^{-1}`` pointwise to a design in transformed time."""
    iv = model.interval
    if not iv.contains(design_tilde.points, tol=1e-12 * max(abs(iv.a), abs(iv.b))):
        raise DomainError("design point outside the transformed interval")
    if model.is_identity:
        return design_tilde
    return Design(model.back_map(design_tilde.points))
