"""Regression bases ``f(t) = (f_1(t), ..., f_m(t))`` with analytic derivatives."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .domain import Interval
from .errors import CapabilityError, InvalidBasisError
from .quadrature import integrate_outer

RANK_RTOL = 1e-10


def _broadcast(fn, t):
    t = np.asarray(t, dtype=float)
    return np.broadcast_to(np.asarray(fn(t), dtype=float), t.shape)


@dataclass(frozen=True)
class Component:
    """One scalar regression function with its first (and optionally second) derivative."""

    value: Callable
    derivative: Callable
    second: Optional[Callable] = None
    label: str = ""


@dataclass(frozen=True)
class RegressionBasis:
    components: tuple
    label: str = ""

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise InvalidBasisError("a basis needs at least one component")
        object.__setattr__(self, "components", comps)

    @property
    def m(self) -> int:
        return len(self.components)

    @property
    def has_second(self) -> bool:
        return all(c.second is not None for c in self.components)

    def _stack(self, attr, t):
        return np.stack([_broadcast(getattr(c, attr), t) for c in self.components])

    def f(self, t) -> np.ndarray:
        """Values, shape ``(m,)`` for scalar ``t`` or ``(m, k)`` for ``k`` points."""
        return self._stack("value", t)

    def df(self, t) -> np.ndarray:
        return self._stack("derivative", t)

    def ddf(self, t, fd_step: Optional[float] = None) -> np.ndarray:
        """Second derivatives; analytic when available, else central differences of ``df``.

        The finite-difference fallback is only used when ``fd_step`` is given.
        """
        if self.has_second:
            return self._stack("second", t)
        if fd_step is None:
            raise CapabilityError(f"basis {self.label!r} has no analytic second derivative")
        t = np.asarray(t, dtype=float)
        return (self.df(t + fd_step) - self.df(t - fd_step)) / (2.0 * fd_step)

    def subset(self, indices: Sequence[int]) -> "RegressionBasis":
        return RegressionBasis(tuple(self.components[i] for i in indices),
                               label=f"{self.label}[{','.join(map(str, indices))}]")

    def __repr__(self) -> str:
        names = ", ".join(c.label or "?" for c in self.components)
        return f"RegressionBasis({names})"


def _power(p: int) -> Component:
    def value(t):
        return np.ones_like(t) if p == 0 else t ** p

    def derivative(t):
        return np.zeros_like(t) if p == 0 else p * t ** (p - 1)

    def second(t):
        return np.zeros_like(t) if p < 2 else p * (p - 1) * t ** (p - 2)

    return Component(value, derivative, second, label="1" if p == 0 else f"t^{p}")


def polynomial_basis(powers: Sequence[int]) -> RegressionBasis:
    """Monomials ``t^p`` for each ``p`` in ``powers`` (in the given order)."""
    powers = [int(p) for p in powers]
    if not powers:
        raise InvalidBasisError("powers must be non-empty")
    if any(p < 0 for p in powers):
        raise InvalidBasisError(f"powers must be non-negative: {powers}")
    if len(set(powers)) != len(powers):
        raise InvalidBasisError(f"duplicate powers: {powers}")
    return RegressionBasis(tuple(_power(p) for p in powers),
                           label=f"polynomial{tuple(powers)}")


def _sin(k: int) -> Component:
    return Component(lambda t: np.sin(k * t), lambda t: k * np.cos(k * t),
                     lambda t: -k * k * np.sin(k * t), label=f"sin({k}t)")


def _cos(k: int) -> Component:
    return Component(lambda t: np.cos(k * t), lambda t: -k * np.sin(k * t),
                     lambda t: -k * k * np.cos(k * t), label=f"cos({k}t)")


def trig_basis(frequencies: Sequence[int]) -> RegressionBasis:
    """Pairs ``(sin kt, cos kt)`` for each frequency ``k``, in order."""
    freqs = [int(k) for k in frequencies]
    if not freqs:
        raise InvalidBasisError("frequencies must be non-empty")
    if any(k <= 0 for k in freqs):
        raise InvalidBasisError(f"frequencies must be positive: {freqs}")
    if len(set(freqs)) != len(freqs):
        raise InvalidBasisError(f"duplicate frequencies: {freqs}")
    comps = []
    for k in freqs:
        comps += [_sin(k), _cos(k)]
    return RegressionBasis(tuple(comps), label=f"trig{tuple(freqs)}")


def affine_shift(base: RegressionBasis, offset) -> RegressionBasis:
    """Add a constant ``offset`` (scalar or per-component) to every component value."""
    offsets = np.broadcast_to(np.asarray(offset, dtype=float), (base.m,))
    comps = []
    for c, c0 in zip(base.components, offsets):
        c0 = float(c0)
        comps.append(Component(lambda t, v=c.value, c0=c0: v(t) + c0,
                               c.derivative, c.second,
                               label=f"{c.label}{c0:+g}" if c0 else c.label))
    return RegressionBasis(tuple(comps), label=f"{base.label}{'+offset' if np.any(offsets) else ''}")


def custom_basis(values: Sequence[Callable], derivatives: Sequence[Callable],
                 seconds: Optional[Sequence[Callable]] = None, label: str = "custom") -> RegressionBasis:
    """Basis from paired value/derivative callables (vectorised over numpy arrays)."""
    if len(values) != len(derivatives) or (seconds is not None and len(seconds) != len(values)):
        raise InvalidBasisError("values, derivatives and seconds must have equal length")
    seconds = seconds if seconds is not None else [None] * len(values)
    comps = tuple(Component(v, d, s, label=f"{label}_{i + 1}")
                  for i, (v, d, s) in enumerate(zip(values, derivatives, seconds)))
    return RegressionBasis(comps, label=label)


def numerical_rank(matrix: np.ndarray, rtol: float = RANK_RTOL) -> int:
    s = np.linalg.svd(np.atleast_2d(matrix), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def derivative_gram(basis: RegressionBasis, interval: Interval) -> np.ndarray:
    """``M = int_a^b f'(t) f'(t)^T dt``."""
    return integrate_outer(basis.df, interval.a, interval.b)


class GramRank(NamedTuple):
    rank: int
    has_intercept: bool


def gram_rank(basis: RegressionBasis, interval: Interval) -> GramRank:
    """Numerical rank of the derivative Gram matrix and whether the constant lies in span.

    Warns (never repairs) when the components themselves look linearly dependent.
    """
    M = derivative_gram(basis, interval)
    rank = numerical_rank(M)
    G = integrate_outer(basis.f, interval.a, interval.b)
    if numerical_rank(G) < basis.m:
        warnings.warn(f"components of {basis!r} appear linearly dependent on "
                      f"[{interval.a}, {interval.b}]", RuntimeWarning, stacklevel=2)
    return GramRank(rank, rank < basis.m)
