"""Closed forms for moments of complex exponentials on a finite window.

Everything here reduces to

    J_k(w) = integral_0^tau t^k exp(i w t) dt

evaluated stably for any real w, including w == 0.  Near-resonant
arguments (|w * tau| small) are handled with a Maclaurin series instead
of the integration-by-parts recursion, so no explicit limit branches are
needed at the call sites.
"""

from __future__ import annotations

import numpy as np

# Dimensionless switch between series and recursion for J_k.  Below the
# radius the series converges in < 25 terms with no cancellation; above
# it the recursion is stable for the small k used in this package.
_SERIES_RADIUS = 4.0
_MAX_SERIES_TERMS = 60


def _moment_series(k: int, z: np.ndarray) -> np.ndarray:
    """sum_m (iz)^m / (m! (k+m+1)) for |z| below the series radius."""
    iz = 1j * z
    term = np.ones_like(iz)
    total = term / (k + 1)
    for m in range(1, _MAX_SERIES_TERMS):
        term = term * iz / m
        contrib = term / (k + m + 1)
        total = total + contrib
        if np.all(np.abs(contrib) <= 1e-18 * np.abs(total)):
            break
    return total


def phase_moment(k: int, w, tau: float):
    """J_k(w) = integral_0^tau t^k exp(i w t) dt, vectorized over w.

    k must be a small non-negative integer (the recursion is used only
    for |w * tau| above the series radius, where it is stable for the
    k <= ~10 needed by the callers).
    """
    w = np.asarray(w, dtype=float)
    z = w * tau
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty(z.shape, dtype=complex)

    small = np.abs(z) < _SERIES_RADIUS
    if np.any(small):
        out[small] = _moment_series(k, z[small])
    if np.any(~small):
        zb = z[~small]
        eiz = np.exp(1j * zb)
        m = (eiz - 1.0) / (1j * zb)
        for j in range(1, k + 1):
            m = (eiz - j * m) / (1j * zb)
        out[~small] = m

    out *= tau ** (k + 1)
    return out[0] if scalar else out


def sine_phase_moment(k: int, nu, u, tau: float):
    """integral_0^tau t^k sin(nu t) exp(i u t) dt, vectorized.

    nu and u broadcast against each other.
    """
    nu = np.asarray(nu, dtype=float)
    u = np.asarray(u, dtype=float)
    return (phase_moment(k, u + nu, tau) - phase_moment(k, u - nu, tau)) / 2j
