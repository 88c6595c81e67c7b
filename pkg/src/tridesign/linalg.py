"""Small dense linear-algebra helpers shared by the estimator modules."""

from __future__ import annotations

import numpy as np
from scipy import linalg as sla

from .errors import SingularModelError

PINV_RTOL = 1e-10


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def spd_factor(A: np.ndarray, what: str = "matrix"):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.all(np.isfinite(A)):
        raise SingularModelError(f"{what} has non-finite entries")
    try:
        factor = sla.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularModelError(f"{what} is not positive definite") from exc
    diag = np.abs(np.diag(factor[0]))
    # Cholesky can succeed on matrices that are singular up to rounding.
    if diag.min() <= 1e-11 * diag.max():
        raise SingularModelError(f"{what} is numerically singular")
    return factor


def spd_inverse(A: np.ndarray, what: str = "matrix") -> np.ndarray:
    factor = spd_factor(A, what)
    inv = sla.cho_solve(factor, np.eye(factor[0].shape[0]), check_finite=False)
    return symmetrize(inv)


def pinv(A: np.ndarray, rtol: float = PINV_RTOL) -> np.ndarray:
    return np.linalg.pinv(A, rcond=rtol, hermitian=True)


def min_eig(A: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(symmetrize(np.atleast_2d(A))).min())


def is_psd(A: np.ndarray, atol: float = 1e-9) -> bool:
    return min_eig(A) >= -atol
