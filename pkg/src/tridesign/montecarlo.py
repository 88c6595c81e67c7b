"""Monte Carlo checks of the variance formulas.

Replicates are generated in fixed-size chunks, each from its own child of a
``SeedSequence``, so results depend only on the seed and not on how the
chunks are consumed.  Standard errors use batch means over 20 batches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from .basis import RegressionBasis
from .discrete_estimator import LinearEstimator, apply_estimator
from .domain import Design
from .errors import InvalidDesignError, InvalidInputError
from .finite_blue import wlse_estimate
from .kernel import TriangularKernel, covariance_matrix

CHUNK = 5000
N_BATCHES = 20


@dataclass(frozen=True)
class SimulationPlan:
    basis: RegressionBasis
    kernel: TriangularKernel
    design: Design
    theta_true: np.ndarray
    replicates: int
    seed: int = 0

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta_true, dtype=float))
        if theta.size != self.basis.m:
            raise InvalidInputError(f"theta has {theta.size} entries, basis has {self.basis.m}")
        if self.replicates < 1:
            raise InvalidInputError("replicates must be >= 1")
        object.__setattr__(self, "theta_true", theta)

    @property
    def mean(self) -> np.ndarray:
        return self.theta_true @ self.basis.f(self.design.points)


def _noise_factor(kernel: TriangularKernel, design: Design):
    if kernel.kind == "brownian":
        t = design.points
        if t[0] < 0:
            raise InvalidDesignError("Brownian motion needs t >= 0")
        return np.sqrt(np.diff(np.concatenate([[0.0], t])))
    try:
        return np.linalg.cholesky(covariance_matrix(kernel, design))
    except np.linalg.LinAlgError as exc:
        raise InvalidDesignError("covariance matrix of the design is not positive definite") from exc


def _chunks(plan: SimulationPlan, chunk: int = CHUNK):
    factor = _noise_factor(plan.kernel, plan.design)
    n = plan.design.n
    mean = plan.mean[:, None]
    n_chunks = -(-plan.replicates // chunk)
    children = np.random.SeedSequence(plan.seed).spawn(n_chunks)
    for k, child in enumerate(children):
        r = min(chunk, plan.replicates - k * chunk)
        z = np.random.Generator(np.random.Philox(child)).standard_normal((n, r))
        if factor.ndim == 1:
            noise = np.cumsum(factor[:, None] * z, axis=0)
        else:
            noise = factor @ z
        yield mean + noise


def sample_observations(plan: SimulationPlan) -> np.ndarray:
    """``n x replicates`` matrix of ``theta^T f(t_i) + noise``."""
    return np.hstack(list(_chunks(plan)))


def simulate_estimates(plan: SimulationPlan, estimators: Dict[str, Callable]) -> Dict[str, np.ndarray]:
    """Apply each estimator (``Y (n, r) -> (m, r)``) chunk by chunk; returns ``(m, R)`` arrays."""
    out = {name: [] for name in estimators}
    for Y in _chunks(plan):
        for name, est in estimators.items():
            out[name].append(np.asarray(est(Y)).reshape(-1, Y.shape[1]))
    return {name: np.hstack(parts) for name, parts in out.items()}


def batch_means(x: np.ndarray, batches: int = N_BATCHES):
    """Mean over the last axis and its batch-means standard error."""
    x = np.asarray(x, dtype=float)
    R = x.shape[-1]
    if R < batches:
        raise InvalidInputError(f"need at least {batches} replicates for batch means")
    usable = R - R % batches
    per = x[..., :usable].reshape(x.shape[:-1] + (batches, usable // batches)).mean(axis=-1)
    return x.mean(axis=-1), per.std(axis=-1, ddof=1) / np.sqrt(batches)


@dataclass(frozen=True, eq=False)
class MseReport:
    bias: np.ndarray
    bias_se: np.ndarray
    mse_matrix: np.ndarray
    mse_se: np.ndarray
    replicates: int

    def bias_z(self) -> np.ndarray:
        return np.abs(self.bias) / self.bias_se

    def mse_z(self, theory: np.ndarray) -> np.ndarray:
        return np.abs(self.mse_matrix - theory) / self.mse_se

    def check(self, theory: Optional[np.ndarray] = None, mse_band: float = 3.0,
              bias_band: float = 4.0) -> dict:
        res = {"bias_ok": bool(np.all(self.bias_z() <= bias_band)),
               "max_bias_z": float(np.max(self.bias_z()))}
        if theory is not None:
            z = self.mse_z(theory)
            res.update(mse_ok=bool(np.all(z <= mse_band)), max_mse_z=float(np.max(z)))
        return res

    def to_json(self) -> dict:
        return {"bias": self.bias.tolist(), "bias_se": self.bias_se.tolist(),
                "mse_matrix": self.mse_matrix.tolist(), "mse_se": self.mse_se.tolist(),
                "replicates": self.replicates}


def mse_report(estimates: np.ndarray, theta: np.ndarray) -> MseReport:
    """Empirical bias and ``E[(est - theta)(est - theta)^T]`` with batch-means errors."""
    d = estimates - np.asarray(theta, dtype=float)[:, None]
    bias, bias_se = batch_means(d)
    outer = d[:, None, :] * d[None, :, :]
    mse, mse_se = batch_means(outer)
    return MseReport(bias, bias_se, mse, mse_se, d.shape[1])


def empirical_mse(estimator, plan: SimulationPlan) -> MseReport:
    """Simulate ``plan`` and summarise a :class:`LinearEstimator` or ``"wlse"``."""
    if isinstance(estimator, LinearEstimator):
        if estimator.n != plan.design.n or not np.allclose(estimator.design.points, plan.design.points):
            raise InvalidInputError("estimator design does not match the simulation plan")
        fn = lambda Y: apply_estimator(estimator, Y)  # noqa: E731
    elif estimator == "wlse":
        fn = lambda Y: wlse_estimate(plan.basis, plan.kernel, plan.design, Y)  # noqa: E731
    elif callable(estimator):
        fn = estimator
    else:
        raise InvalidInputError(f"unsupported estimator {estimator!r}")
    est = simulate_estimates(plan, {"est": fn})["est"]
    return mse_report(est, plan.theta_true)


def decomposition_check(plan: SimulationPlan, estimator: LinearEstimator,
                        reference: LinearEstimator) -> tuple:
    """Empirical ``E[(est - theta)^2] - E[(est - ref)^2]`` with batch-means SE.

    ``plan.design`` must contain both estimators' designs; each estimator
    reads its own points from the simulated path.
    """
    pts = plan.design.points
    idx_e = np.searchsorted(pts, estimator.design.points)
    idx_r = np.searchsorted(pts, reference.design.points)
    if not (np.allclose(pts[idx_e], estimator.design.points)
            and np.allclose(pts[idx_r], reference.design.points)):
        raise InvalidInputError("plan design must contain both estimators' points")
    ests = simulate_estimates(plan, {
        "est": lambda Y: apply_estimator(estimator, Y[idx_e]),
        "ref": lambda Y: apply_estimator(reference, Y[idx_r]),
    })
    d1 = ests["est"] - plan.theta_true[:, None]
    d2 = ests["est"] - ests["ref"]
    diff = d1[:, None, :] * d1[None, :, :] - d2[:, None, :] * d2[None, :, :]
    return batch_means(diff)
