"""Weighted least squares: the exact BLUE for ``n`` correlated observations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .basis import RegressionBasis
from .domain import Design
from .errors import InvalidDesignError, InvalidInputError, SingularModelError
from .kernel import TriangularKernel, covariance_matrix
from .linalg import spd_inverse, symmetrize


@dataclass(frozen=True, eq=False)
class WlseResult:
    variance: np.ndarray
    design: Design
    info: np.ndarray

    def to_json(self) -> dict:
        return {"design": self.design.points.tolist(), "variance": self.variance.tolist(),
                "info": self.info.tolist()}


def design_matrix(basis: RegressionBasis, design: Design) -> np.ndarray:
    """``X`` with ``X[j, p] = f_p(t_j)``."""
    return basis.f(design.points).T


def _whiten(basis, kernel, design):
    Sigma = covariance_matrix(kernel, design)
    try:
        L = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError as exc:
        raise InvalidDesignError("covariance matrix of the design is not positive definite") from exc
    Xw = sla.solve_triangular(L, design_matrix(basis, design), lower=True)
    return L, Xw


def wlse_variance(basis: RegressionBasis, kernel: TriangularKernel, design: Design) -> WlseResult:
    """``(X^T Sigma^{-1} X)^{-1}`` using the Cholesky factor of ``Sigma``."""
    _, Xw = _whiten(basis, kernel, design)
    info = symmetrize(Xw.T @ Xw)
    try:
        var = spd_inverse(info, "X^T Sigma^-1 X")
    except SingularModelError as exc:
        raise SingularModelError("design matrix is rank deficient on this design") from exc
    return WlseResult(var, design, info)


def wlse_estimate(basis: RegressionBasis, kernel: TriangularKernel, design: Design,
                  observations) -> np.ndarray:
    """GLS estimate; ``observations`` may be an n-vector or an (n, r) replicate matrix."""
    Y = np.asarray(observations, dtype=float)
    if Y.shape[0] != design.n:
        raise InvalidInputError(f"expected {design.n} observations, got {Y.shape[0]}")
    L, Xw = _whiten(basis, kernel, design)
    Yw = sla.solve_triangular(L, Y, lower=True)
    var = spd_inverse(symmetrize(Xw.T @ Xw), "X^T Sigma^-1 X")
    return var @ (Xw.T @ Yw)


def wlse_trace(basis: RegressionBasis, kernel: TriangularKernel, points) -> float:
    return float(np.trace(wlse_variance(basis, kernel, Design(points)).variance))


def efficiency_of(variance: np.ndarray, reference_c_inv: np.ndarray) -> float:
    """``tr(reference) / tr(variance)``."""
    return float(np.trace(reference_c_inv) / np.trace(variance))


def determinant_efficiency(variance: np.ndarray, reference_c_inv: np.ndarray) -> float:
    m = variance.shape[0]
    return float((np.linalg.det(reference_c_inv) / np.linalg.det(variance)) ** (1.0 / m))
