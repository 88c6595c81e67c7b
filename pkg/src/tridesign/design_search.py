"""Particle swarm search over the interior points of an ``n``-point design.

The endpoints stay at ``a`` and ``b``; the ``n - 2`` interior coordinates are
searched.  Two objectives are supported:

* ``mse_star``: trace of the mean squared distance between the optimal-weight
  estimator and the continuous BLUE (evaluated in Doob time for non-Brownian
  kernels, the winning design is then mapped back);
* ``wlse_trace``: trace of the weighted least squares variance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .basis import RegressionBasis
from .continuous_blue import c_matrix
from .discrete_estimator import mse_star_trace
from .domain import Design, Interval
from .errors import InvalidDesignError, InvalidInputError, SearchError, TridesignError
from .finite_blue import wlse_trace
from .kernel import TriangularKernel, doob_transform

log = logging.getLogger(__name__)

OBJECTIVES = ("mse_star", "wlse_trace")
MIN_SPACING = 1e-6
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 40
    iterations: int = 300
    inertia: float = 0.72
    cognitive: float = 1.49
    social: float = 1.49
    seed: int = 20160101
    restarts: int = 8

    def __post_init__(self):
        if self.swarm_size < 10:
            raise InvalidInputError("swarm_size must be at least 10")
        if self.iterations < 1 or self.restarts < 1:
            raise InvalidInputError("iterations and restarts must be positive")
        if min(self.inertia, self.cognitive, self.social) <= 0:
            raise InvalidInputError("PSO coefficients must be positive")


@dataclass(frozen=True, eq=False)
class SearchResult:
    design: Design
    objective_value: float
    trace: np.ndarray
    converged: bool
    objective: str = ""
    failures: int = 0
    config: Optional[PsoConfig] = None
    restart_values: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = {"design": self.design.points.tolist(),
               "objective": self.objective,
               "objective_value": float(f"{self.objective_value:.12e}"),
               "converged": self.converged,
               "failures": self.failures,
               "trace": self.trace.tolist()}
        if self.config is not None:
            out["pso"] = {k: getattr(self.config, k) for k in self.config.__dataclass_fields__}
        return out


def equidistant_design(n: int, interval: Interval) -> Design:
    if n < 2:
        raise InvalidDesignError("n must be at least 2")
    pts = interval.a + np.arange(n) / (n - 1) * interval.length
    pts[-1] = interval.b
    return Design(pts)


class DesignObjective:
    """Objective on full designs (endpoints included) in the search interval.

    ``interval`` is the space searched; ``to_original`` maps a winning design
    back to the original time scale.
    """

    def __init__(self, kind: str, basis: RegressionBasis, kernel: TriangularKernel,
                 interval: Interval):
        if kind not in OBJECTIVES:
            raise InvalidInputError(f"unknown objective {kind!r}; expected one of {OBJECTIVES}")
        self.kind = kind
        self.kernel = kernel
        self.original_interval = interval
        self.model = None
        if kind == "mse_star":
            self.model = doob_transform(basis, kernel, interval)
            self.basis = self.model.basis
            self.interval = self.model.interval
            self.blue = c_matrix(self.basis, self.interval)
        else:
            kernel.validate(interval)
            self.basis = basis
            self.interval = interval
            self.blue = None

    def __call__(self, points) -> float:
        points = np.asarray(points, dtype=float)
        if self.kind == "mse_star":
            return mse_star_trace(self.basis, points, self.blue)
        return wlse_trace(self.basis, self.kernel, points)

    def batch(self, X: np.ndarray) -> np.ndarray:
        """Vectorised objective for a (P, n) array of designs; failures give ``inf``."""
        if self.kind == "mse_star":
            return self._batch_mse_star(X)
        return self._batch_wlse(X)

    def _batch_mse_star(self, X):
        F = np.moveaxis(self.basis.f(X), 0, -1)          # (P, n, m)
        dF = np.diff(F, axis=1)
        dt = np.diff(X, axis=1)
        B = np.einsum("pik,pil->pkl", dF / dt[..., None], dF)
        G = self.blue.C_inv @ self.blue.M
        base = np.trace(G @ self.blue.C_inv)
        out = np.full(X.shape[0], np.inf)
        ok = np.all(np.isfinite(B), axis=(1, 2))
        if not np.any(ok):
            return out
        try:
            L = np.linalg.cholesky(B[ok])
        except np.linalg.LinAlgError:
            return np.array([self._safe(x) for x in X])
        Z = np.linalg.solve(L, np.broadcast_to(G.T, (L.shape[0],) + G.T.shape))
        out[ok] = np.einsum("pij,pij->p", Z, Z) - base
        return out

    def _batch_wlse(self, X):
        S = self.kernel(X[:, :, None], X[:, None, :])
        F = np.moveaxis(self.basis.f(X), 0, -1)
        try:
            L = np.linalg.cholesky(S)
            Xw = np.linalg.solve(L, F)
            info = np.einsum("pki,pkj->pij", Xw, Xw)
            Li = np.linalg.cholesky(info)
        except np.linalg.LinAlgError:
            return np.array([self._safe(x) for x in X])
        eye = np.broadcast_to(np.eye(info.shape[-1]), info.shape)
        W = np.linalg.solve(Li, eye)
        vals = np.einsum("pij,pij->p", W, W)
        vals[~np.isfinite(vals)] = np.inf
        return vals

    def _safe(self, x) -> float:
        try:
            val = self(x)
        except (TridesignError, np.linalg.LinAlgError, FloatingPointError):
            return np.inf
        return val if np.isfinite(val) else np.inf

    def to_original(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.model is not None and not self.model.is_identity:
            pts = self.model.back_map(pts)
        pts = pts.copy()
        pts[0], pts[-1] = self.original_interval.a, self.original_interval.b
        return pts

    def from_original(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.model is not None and not self.model.is_identity:
            pts = self.model.forward_map(pts)
        pts = pts.copy()
        pts[0], pts[-1] = self.interval.a, self.interval.b
        return pts


def _repair(inner: np.ndarray, lo: float, hi: float, delta: float) -> np.ndarray:
    """Sort each row, clamp into ``[lo + delta, hi - delta]`` and enforce spacing ``delta``."""
    x = np.sort(inner, axis=1)
    x = np.clip(x, lo + delta, hi - delta)
    k = x.shape[1]
    for j in range(1, k):
        x[:, j] = np.maximum(x[:, j], x[:, j - 1] + delta)
    x[:, -1] = np.minimum(x[:, -1], hi - delta)
    for j in range(k - 2, -1, -1):
        x[:, j] = np.minimum(x[:, j], x[:, j + 1] - delta)
    return x


def _full(inner: np.ndarray, lo: float, hi: float) -> np.ndarray:
    P = inner.shape[0]
    return np.hstack([np.full((P, 1), lo), inner, np.full((P, 1), hi)])


def _run_swarm(objective: DesignObjective, n: int, config: PsoConfig, restart: int):
    lo, hi = objective.interval.a, objective.interval.b
    width = hi - lo
    delta = MIN_SPACING * width
    dim = n - 2
    rng = np.random.default_rng([config.seed, restart])
    P = config.swarm_size
    vmax = 0.5 * width

    def sample(k):
        return _repair(rng.uniform(lo, hi, size=(k, dim)), lo, hi, delta)

    x = sample(P)
    x[0] = objective.from_original(equidistant_design(n, objective.original_interval).points)[1:-1]
    x = _repair(x, lo, hi, delta)
    v = rng.uniform(-0.1 * width, 0.1 * width, size=(P, dim))
    evaluations = failures = 0

    def evaluate(pos):
        nonlocal evaluations, failures
        vals = objective.batch(_full(pos, lo, hi))
        bad = ~np.isfinite(vals)
        evaluations += len(vals)
        for _ in range(5):
            if not np.any(bad):
                break
            failures += int(bad.sum())
            pos[bad] = sample(int(bad.sum()))
            vals[bad] = objective.batch(_full(pos[bad], lo, hi))
            bad = ~np.isfinite(vals)
        if evaluations and failures > 0.5 * evaluations:
            raise SearchError(f"objective failed on {failures} of {evaluations} evaluations")
        return vals

    y = evaluate(x)
    pbest_x, pbest_y = x.copy(), y.copy()
    g = int(np.argmin(pbest_y))
    gbest_x, gbest_y = pbest_x[g].copy(), float(pbest_y[g])
    trace = np.empty(config.iterations)
    for it in range(config.iterations):
        r1 = rng.uniform(size=(P, dim))
        r2 = rng.uniform(size=(P, dim))
        v = (config.inertia * v + config.cognitive * r1 * (pbest_x - x)
             + config.social * r2 * (gbest_x - x))
        v = np.clip(v, -vmax, vmax)
        x = _repair(x + v, lo, hi, delta)
        y = evaluate(x)
        better = y < pbest_y
        pbest_x[better] = x[better]
        pbest_y[better] = y[better]
        g = int(np.argmin(pbest_y))
        if pbest_y[g] < gbest_y:
            gbest_x, gbest_y = pbest_x[g].copy(), float(pbest_y[g])
        trace[it] = gbest_y
    return gbest_x, gbest_y, trace, failures


def optimize_design(objective: str, basis: RegressionBasis, kernel: TriangularKernel, n: int,
                    interval: Interval, config: Optional[PsoConfig] = None,
                    polish_result: bool = False) -> SearchResult:
    """Best-of-restarts PSO design with endpoints pinned to ``a`` and ``b``."""
    config = config or PsoConfig()
    if n < 2:
        raise InvalidDesignError("n must be at least 2")
    obj = DesignObjective(objective, basis, kernel, interval)
    if n == 2:
        d = Design([interval.a, interval.b])
        val = obj(obj.from_original(d.points))
        return SearchResult(d, val, np.array([val]), True, objective, 0, config, [val])
    runs = []
    failures = 0
    for r in range(config.restarts):
        x, y, trace, fails = _run_swarm(obj, n, config, r)
        failures += fails
        runs.append((x, y, trace))
        log.debug("restart %d: objective %.12g", r, y)
    restart_values = [y for _, y, _ in runs]
    best_y = min(restart_values)
    # Symmetric problems have several equally good designs; prefer the
    # lexicographically smallest among ties so the result is reproducible.
    tol = TIE_RTOL * max(1.0, abs(best_y))
    ties = [run for run in runs if run[1] <= best_y + tol]
    x, _, trace = min(ties, key=lambda run: tuple(run[0]))
    work = np.concatenate([[obj.interval.a], x, [obj.interval.b]])
    tail = trace[-min(50, len(trace)):]
    converged = bool(abs(tail[0] - tail[-1]) <= 1e-10 * max(1.0, abs(tail[-1])))
    design = Design(obj.to_original(work))
    result = SearchResult(design, obj(obj.from_original(design.points)), trace, converged,
                          objective, failures, config, restart_values)
    if polish_result:
        result = polish(result.design, obj, result)
    return result


def polish(design: Design, objective: DesignObjective, previous: Optional[SearchResult] = None,
           sweeps: int = 50, xatol: float = 1e-12) -> SearchResult:
    """Coordinate-wise bounded line search on the interior points; never increases the objective."""
    pts = objective.from_original(design.points)
    lo, hi = objective.interval.a, objective.interval.b
    delta = MIN_SPACING * (hi - lo)
    current = objective(pts)
    for _ in range(sweeps):
        start = current
        for i in range(1, len(pts) - 1):
            left, right = pts[i - 1] + delta, pts[i + 1] - delta
            if right <= left:
                continue

            def line(z, i=i):
                trial = pts.copy()
                trial[i] = z
                return objective._safe(trial)

            res = minimize_scalar(line, bounds=(left, right), method="bounded",
                                  options={"xatol": xatol * (hi - lo)})
            if res.fun < current - 1e-14 * max(1.0, abs(current)):
                pts[i] = res.x
                current = float(res.fun)
        if start - current <= 1e-14 * max(1.0, abs(current)):
            break
    final = Design(objective.to_original(pts))
    value = objective(objective.from_original(final.points))
    trace = previous.trace if previous is not None else np.array([value])
    return SearchResult(final, value, trace, True if previous is None else previous.converged,
                        objective.kind, previous.failures if previous else 0,
                        previous.config if previous else None,
                        previous.restart_values if previous else [])
