"""Intervals and ordered designs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDesignError, DomainError


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
            raise DomainError(f"invalid interval [{self.a}, {self.b}]: need a < b")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def length(self) -> float:
        return self.b - self.a

    def grid(self, n: int = 1001) -> np.ndarray:
        return np.linspace(self.a, self.b, n)

    def contains(self, t, tol: float = 0.0) -> bool:
        t = np.asarray(t, dtype=float)
        return bool(np.all((t >= self.a - tol) & (t <= self.b + tol)))


@dataclass(frozen=True, eq=False)
class Design:
    """Strictly increasing observation times ``t_1 < ... < t_n``."""

    points: np.ndarray = field()

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).ravel()
        if pts.size < 2:
            raise InvalidDesignError("a design needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise InvalidDesignError("design points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise InvalidDesignError(f"design points must be strictly increasing: {pts.tolist()}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.size

    def __iter__(self):
        return iter(self.points.tolist())

    def __repr__(self) -> str:
        return f"Design({np.array2string(self.points, precision=6, separator=', ')})"

    @property
    def n(self) -> int:
        return self.points.size

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def interval(self) -> Interval:
        return Interval(self.points[0], self.points[-1])

    def check_span(self, interval: Interval, rtol: float = 1e-12) -> None:
        """Raise unless the design starts at ``interval.a`` and ends at ``interval.b``."""
        tol = rtol * max(1.0, abs(interval.a), abs(interval.b))
        if abs(self.points[0] - interval.a) > tol or abs(self.points[-1] - interval.b) > tol:
            raise InvalidDesignError(
                f"design must start at a={interval.a} and end at b={interval.b}, "
                f"got [{self.points[0]}, {self.points[-1]}]")

    def check_spacing(self, interval: Interval, rel: float = 1e-9) -> None:
        if np.min(self.spacings) < rel * interval.length:
            raise InvalidDesignError("design points closer than the minimum spacing")
