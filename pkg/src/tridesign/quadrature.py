"""Adaptive Gauss-Legendre quadrature for vector- and matrix-valued integrands."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import NumericError

PANEL_NODES = 15
MAX_DEPTH = 40
MAX_PANELS = 20000


@lru_cache(maxsize=8)
def _rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _panel(func, lo: float, hi: float, nodes: np.ndarray, weights: np.ndarray) -> np.ndarray:
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    values = np.asarray(func(mid + half * nodes), dtype=float)
    return half * (values @ weights)


def integrate(func, a: float, b: float, abs_tol: float = 1e-12,
              n_nodes: int = PANEL_NODES, max_depth: int = MAX_DEPTH) -> np.ndarray:
    """Integrate ``func`` over ``[a, b]``.

    ``func`` is evaluated on a 1-d array of nodes and must return an array
    whose last axis runs over those nodes; the result drops that axis.
    A panel is accepted when its one-rule estimate and the sum of its two
    halves differ by less than its share of ``abs_tol`` (elementwise max).
    """
    if not (np.isfinite(a) and np.isfinite(b)):
        raise NumericError(f"non-finite integration limits [{a}, {b}]")
    if a == b:
        shape = np.asarray(func(np.array([a], dtype=float))).shape[:-1]
        return np.zeros(shape)
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    nodes, weights = _rule(n_nodes)
    width = b - a
    total = None
    stack = [(a, b, _panel(func, a, b, nodes, weights), 0)]
    panels = 0
    while stack:
        lo, hi, whole, depth = stack.pop()
        panels += 1
        if panels > MAX_PANELS:
            raise NumericError(f"quadrature exceeded {MAX_PANELS} panels near [{lo}, {hi}]")
        mid = 0.5 * (lo + hi)
        left = _panel(func, lo, mid, nodes, weights)
        right = _panel(func, mid, hi, nodes, weights)
        refined = left + right
        if not np.all(np.isfinite(refined)):
            raise NumericError(f"integrand not finite on [{lo}, {hi}]")
        err = float(np.max(np.abs(refined - whole))) if refined.size else 0.0
        if err <= abs_tol * (hi - lo) / width or depth >= max_depth:
            if depth >= max_depth and err > abs_tol:
                raise NumericError(
                    f"quadrature did not converge on [{lo}, {hi}] (error {err:.3e})")
            total = refined if total is None else total + refined
        else:
            stack.append((mid, hi, right, depth + 1))
            stack.append((lo, mid, left, depth + 1))
    return sign * total


def integrate_outer(g, a: float, b: float, abs_tol: float = 1e-12) -> np.ndarray:
    """Return the matrix ``int_a^b g(s) g(s)^T ds`` for an (m, k)-valued ``g``."""

    def outer(s):
        vals = np.asarray(g(s), dtype=float)
        return vals[:, None, :] * vals[None, :, :]

    return integrate(outer, a, b, abs_tol=abs_tol)
