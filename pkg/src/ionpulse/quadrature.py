"""Adaptive panel-Chebyshev quadrature for oscillatory pulse integrals.

Deliberately independent of the closed forms used by the compiler: all
values here come from sampling integrands on Chebyshev-Lobatto panels,
transforming to Chebyshev coefficients, and integrating the interpolant.
Accuracy is controlled by comparing successively refined grids, so the
reported values carry a defensible error estimate.

Running (cumulative) integrals are available on the same grids, which is
what makes the ordered double integral of the entangling angle tractable
without nested adaptive recursion.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NumericalFailure

DEFAULT_DEGREE = 32
_MAX_REFINEMENTS = 6


@lru_cache(maxsize=8)
def _coeff_transform(degree: int) -> np.ndarray:
    """Values at Chebyshev-Lobatto nodes -> series coefficients."""
    j = np.arange(degree + 1)
    c = np.where((j == 0) | (j == degree), 2.0, 1.0)
    k = j[:, None]
    mat = (2.0 / (degree * c[:, None] * c[None, :])) * np.cos(np.pi * k * j[None, :] / degree)
    return mat


@lru_cache(maxsize=8)
def _series_weights(degree: int) -> np.ndarray:
    """Integral of T_k over [-1, 1]."""
    k = np.arange(degree + 1)
    w = np.zeros(degree + 1)
    even = k % 2 == 0
    w[even] = 2.0 / (1.0 - k[even] ** 2)
    return w


@lru_cache(maxsize=8)
def _antideriv_eval(degree: int) -> np.ndarray:
    """T_m(x_j) for m = 0..degree+1 at the descending Lobatto nodes."""
    j = np.arange(degree + 1)
    m = np.arange(degree + 2)
    return np.cos(np.pi * np.outer(j, m) / degree)


@dataclass(frozen=True)
class PanelGrid:
    """Chebyshev-Lobatto panels over [a, b]; node times ascend."""

    edges: np.ndarray
    degree: int

    @property
    def panel_count(self) -> int:
        return self.edges.size - 1

    @property
    def half_widths(self) -> np.ndarray:
        return np.diff(self.edges) / 2.0

    @property
    def times(self) -> np.ndarray:
        """Node times, shape (panels, degree + 1), ascending in each panel."""
        mid = (self.edges[:-1] + self.edges[1:]) / 2.0
        x = -np.cos(np.pi * np.arange(self.degree + 1) / self.degree)
        return mid[:, None] + self.half_widths[:, None] * x[None, :]

    def refined(self, factor: int = 2) -> "PanelGrid":
        old = self.edges
        new = [old[0]]
        for k in range(old.size - 1):
            step = (old[k + 1] - old[k]) / factor
            new.extend(old[k] + step * (m + 1) for m in range(factor))
        return PanelGrid(edges=np.array(new), degree=self.degree)


def grid_for(a: float, b: float, oscillations: float,
             degree: int = DEFAULT_DEGREE, min_panels: int = 4) -> PanelGrid:
    """Grid with roughly one oscillation period per panel."""
    panels = max(min_panels, int(np.ceil(1.1 * max(oscillations, 1.0))) + 2)
    return PanelGrid(edges=np.linspace(a, b, panels + 1), degree=degree)


def _coefficients(grid: PanelGrid, values: np.ndarray) -> np.ndarray:
    # Transform expects descending-x node order.
    return values[:, ::-1] @ _coeff_transform(grid.degree).T


def integrate_on_grid(grid: PanelGrid, values: np.ndarray) -> complex:
    coeffs = _coefficients(grid, values)
    per_panel = coeffs @ _series_weights(grid.degree)
    return complex(np.sum(per_panel * grid.half_widths))


def cumulative_on_grid(grid: PanelGrid, values: np.ndarray) -> np.ndarray:
    """Running integral from grid start, evaluated at every node."""
    deg = grid.degree
    coeffs = _coefficients(grid, values)
    b = np.zeros(coeffs.shape[:-1] + (deg + 2,), dtype=coeffs.dtype)
    # antiderivative series: b_m = (c_{m-1} a_{m-1} - a_{m+1}) / (2 m)
    for m in range(1, deg + 2):
        lead = 2.0 if m == 1 else 1.0
        upper = coeffs[:, m + 1] if m + 1 <= deg else 0.0
        b[:, m] = (lead * coeffs[:, m - 1] - upper) / (2.0 * m)
    signs = (-1.0) ** np.arange(1, deg + 2)
    b[:, 0] = -np.sum(b[:, 1:] * signs[None, :], axis=1)
    f_desc = b @ _antideriv_eval(deg).T
    f_asc = f_desc[:, ::-1] * grid.half_widths[:, None]
    panel_totals = f_asc[:, -1]
    offsets = np.concatenate(([0.0], np.cumsum(panel_totals)[:-1]))
    return f_asc + offsets[:, None]


def adaptive_integral(sampler, a: float, b: float, oscillations: float,
                      tol: float, degree: int = DEFAULT_DEGREE):
    """Integrate sampler(times) over [a, b] to absolute tolerance tol.

    Refines the grid globally until two successive resolutions agree;
    returns (value, error_estimate).
    """
    grid = grid_for(a, b, oscillations, degree=degree)
    value = integrate_on_grid(grid, sampler(grid.times))
    for _ in range(_MAX_REFINEMENTS):
        fine = grid.refined()
        fine_value = integrate_on_grid(fine, sampler(fine.times))
        err = abs(fine_value - value)
        value, grid = fine_value, fine
        if err <= tol:
            return value, err
    raise NumericalFailure(
        f"quadrature did not reach tolerance {tol:g} (last change {err:g})")
