"""Sine pulse basis and the motional-decoupling constraint system.

Pulses are real linear combinations of sin(omega_l t) with
omega_l = 2 pi l / tau and integer l, so every pulse starts and ends at
zero amplitude.  A pulse decouples from all motional modes when its
overlap integral with every mode phase exp(i omega_p t) vanishes; drift
insensitivity of order K additionally zeroes the first K frequency
derivatives of those overlaps.  Stacking the real and imaginary parts of
all of these gives the constraint matrix whose null space is the legal
pulse design space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import TWO_PI, ModeSpectrum
from .errors import EmptyBasis, InsufficientDOF
from .integrals import sine_phase_moment

DEFAULT_GUARD_MHZ = 0.1
DEFAULT_RANK_TOL = 1e-10


@dataclass(frozen=True)
class BasisSet:
    """Harmonic sine basis over a gate window of tau microseconds."""

    tau: float
    indices: np.ndarray          # integer harmonic numbers, ascending
    stabilization_order: int = 0

    @property
    def frequencies(self) -> np.ndarray:
        """Angular basis frequencies in rad/us."""
        return TWO_PI * self.indices / self.tau

    @property
    def size(self) -> int:
        return self.indices.size

    def sample(self, coeffs: np.ndarray, times: np.ndarray) -> np.ndarray:
        """Evaluate sum_l c_l sin(omega_l t) at the given times (us)."""
        phases = np.outer(np.asarray(times, dtype=float), self.frequencies)
        return np.sin(phases) @ np.asarray(coeffs, dtype=float)


@dataclass(frozen=True)
class NullBasis:
    """Orthonormal columns spanning the constraint null space."""

    matrix: np.ndarray
    rank: int

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]


def build_basis(tau: float, spectrum: ModeSpectrum, guard_mhz: float = DEFAULT_GUARD_MHZ,
                order: int = 0) -> BasisSet:
    """All harmonics l with l/tau inside the mode band plus a guard.

    The window is [f_min - guard, f_max + guard] in MHz with f the
    lowest/highest mode frequencies.  Raises EmptyBasis when the window
    contains no harmonic of 1/tau.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if guard_mhz < 0:
        raise ValueError("guard must be non-negative")
    f = spectrum.frequencies_mhz
    lo = (f.min() - guard_mhz) * tau
    hi = (f.max() + guard_mhz) * tau
    # Tolerate float fuzz when a window edge lands on an integer.
    l_lo = max(1, math.ceil(lo - 1e-9))
    l_hi = math.floor(hi + 1e-9)
    if l_hi < l_lo:
        raise EmptyBasis(
            f"window [{f.min() - guard_mhz:.5f}, {f.max() + guard_mhz:.5f}] MHz "
            f"contains no harmonic of 1/{tau} us")
    return BasisSet(tau=float(tau), indices=np.arange(l_lo, l_hi + 1),
                    stabilization_order=int(order))


def displacement_integral(omega_l: float, omega_p: float, tau: float,
                          order: int = 0) -> complex:
    """Overlap of a basis tone with a mode phase, or its drift derivative.

    Returns integral_0^tau (-i t)^order sin(omega_l t) exp(i omega_p t) dt
    in closed form; exact resonances are handled by series limits inside
    the moment primitive.
    """
    value = sine_phase_moment(order, omega_l, omega_p, tau)
    return complex((-1j) ** order * value)


def build_constraint_matrix(basis: BasisSet, spectrum: ModeSpectrum) -> np.ndarray:
    """Real constraint matrix of shape (2 P (K+1), L).

    Rows are {Re, Im} x {derivative order 0..K} x {modes} of the
    displacement integrals of each basis tone.
    """
    omega_l = basis.frequencies
    k_max = basis.stabilization_order
    rows = []
    for omega_p in spectrum.mode_frequencies:
        for k in range(k_max + 1):
            vals = (-1j) ** k * sine_phase_moment(k, omega_l, omega_p, basis.tau)
            rows.append(vals.real)
            rows.append(vals.imag)
    m = np.array(rows)
    if not np.all(np.isfinite(m)):
        raise FloatingPointError("constraint matrix has non-finite entries")
    return m


def null_space(m: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> NullBasis:
    """Orthonormal null-space basis of m via SVD.

    Rank is the number of singular values above tol * sigma_max.  Raises
    InsufficientDOF when the null space is empty (including the
    rows >= cols case).
    """
    rows, cols = m.shape
    if rows >= cols:
        raise InsufficientDOF(f"{rows} constraints leave no slack in {cols} columns")
    _, sigma, vh = np.linalg.svd(m, full_matrices=True)
    if sigma.size:
        rank = int(np.sum(sigma > tol * sigma[0]))
    else:
        rank = 0
    if cols - rank == 0:
        raise InsufficientDOF("constraint matrix has full column rank")
    return NullBasis(matrix=vh[rank:].T.copy(), rank=rank)


def build_null_basis(basis: BasisSet, spectrum: ModeSpectrum,
                     tol: float = DEFAULT_RANK_TOL) -> NullBasis:
    return null_space(build_constraint_matrix(basis, spectrum), tol=tol)
