"""Small quadrature helpers used by the geometry and diagnostics layers."""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy import integrate

from .errors import QuadratureError

# 10-point Gauss-Legendre panel: exact through degree 19, which is far beyond
# the smoothness scale of one solver step or one grid interval.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def adaptive_quad(f: Callable[[float], float], a: float, b: float,
                  rel_tol: float = 1e-10, abs_floor: float = 1e-300,
                  limit: int = 400, points=None) -> float:
    """Adaptive quadrature of ``f`` on [a, b] (b may be ``np.inf``).

    Raises :class:`QuadratureError` when the achieved error estimate is not
    within ten times the requested tolerance.
    """
    out = integrate.quad(f, a, b, epsabs=abs_floor, epsrel=rel_tol,
                         limit=limit, full_output=1,
                         points=points if b != np.inf else None)
    value, abserr = out[0], out[1]
    if len(out) > 3 and abserr > 10.0 * max(abs_floor, rel_tol * abs(value)):
        raise QuadratureError(
            f"quadrature on [{a}, {b}] did not converge: {out[3]}",
            value=value, error_estimate=abserr)
    return value


def gauss_panel(f, a: float, b: float) -> float:
    """One fixed Gauss-Legendre panel of ``f`` over [a, b]."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return half * float(np.sum(_GL_WEIGHTS * f(mid + half * _GL_NODES)))


def cumulative_gauss(f, nodes: np.ndarray, initial: float = 0.0) -> np.ndarray:
    """Cumulative integral of ``f`` at ``nodes`` via one panel per interval.

    ``nodes`` must be strictly increasing; ``initial`` is the integral up to
    ``nodes[0]``. ``f`` must accept numpy arrays.
    """
    nodes = np.asarray(nodes, dtype=float)
    out = np.empty_like(nodes)
    out[0] = initial
    a = nodes[:-1]
    b = nodes[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    # evaluation points: shape (len(nodes)-1, 10)
    pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = f(pts.ravel()).reshape(pts.shape)
    out[1:] = initial + np.cumsum(half * (vals @ _GL_WEIGHTS))
    return out


def panel_points(a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss points and weights mapped to [a, b] (for integrand-by-hand use)."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return mid + half * _GL_NODES, half * _GL_WEIGHTS
