"""Closed-form two-tone entangling-phase kernels.

For a mode at omega_p, the accumulated two-qubit phase between pulses
g(t1) and h(t2) is the ordered double integral

    theta = 4 integral_0^tau dt2 integral_0^t2 dt1 g(t1) h(t2) sin[omega_p (t1 - t2)]

which is bilinear in the pulse coefficients, so one symmetric matrix per
mode captures it for the whole sine basis.  Writing the inner integral
as a running phase overlap reduces everything to the moment primitives
in integrals.py; the near-resonant denominators are replaced by a short
series in the detuning, so the formulas are valid arbitrarily close to
(and exactly at) resonance.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .basis import BasisSet
from .chain import ModeSpectrum
from .errors import InvalidPair
from .integrals import phase_moment, sine_phase_moment

# Below |w * tau| the 1/w prefactor form is replaced by its detuning
# series (6 terms reach machine precision at the switch point).
_PHI_SERIES_SWITCH = 1e-3
_PHI_SERIES_TERMS = 6


def _tone_overlap_grid(omega_u: np.ndarray, omega_n: np.ndarray, tau: float) -> np.ndarray:
    """G[u, n] = integral_0^tau sin(omega_n t) exp(i omega_u t) dt."""
    u = omega_u[:, None]
    n = omega_n[None, :]
    return (phase_moment(0, u + n, tau) - phase_moment(0, u - n, tau)) / 2j


def _phi(omega_n: np.ndarray, omega_p: float, w: np.ndarray, g_shifted: np.ndarray,
         g_mode: np.ndarray, tau: float) -> np.ndarray:
    """integral_0^tau sin(omega_n t) exp(-i omega_p t) E(t, w) dt per (w, n).

    E(t, w) is the running phase integral int_0^t exp(i w s) ds.
    g_shifted[k, n] must hold the tone overlap at frequency w_k - omega_p
    (computed exactly by the caller); g_mode[n] the one at -omega_p.
    """
    out = np.empty((w.size, omega_n.size), dtype=complex)
    big = np.abs(w) * tau >= _PHI_SERIES_SWITCH
    if np.any(big):
        out[big] = (g_shifted[big] - g_mode[None, :]) / (1j * w[big, None])
    if np.any(~big):
        rows = np.zeros((int(np.sum(~big)), omega_n.size), dtype=complex)
        iw = 1j * w[~big, None]
        iw_pow = np.ones_like(iw)
        for k in range(_PHI_SERIES_TERMS):
            h_k = sine_phase_moment(k + 1, omega_n, -omega_p, tau)
            rows += iw_pow / factorial(k + 1) * h_k[None, :]
            iw_pow = iw_pow * iw
        out[~big] = rows
    return out


def ordered_phase_grid(omega_m: np.ndarray, omega_n: np.ndarray, omega_p: float,
                       tau: float) -> np.ndarray:
    """theta[m, n] for inner tone m and outer tone n (ordered integral)."""
    omega_m = np.atleast_1d(np.asarray(omega_m, dtype=float))
    omega_n = np.atleast_1d(np.asarray(omega_n, dtype=float))
    g_inner = _tone_overlap_grid(omega_m, omega_n, tau)
    g_mode = _tone_overlap_grid(np.array([-omega_p]), omega_n, tau)[0]
    # sin(omega_n t) overlaps at -omega_m are conjugates of those at +omega_m.
    phi_sum = _phi(omega_n, omega_p, omega_p + omega_m, g_inner, g_mode, tau)
    phi_diff = _phi(omega_n, omega_p, omega_p - omega_m, np.conj(g_inner), g_mode, tau)
    return -2.0 * (phi_sum - phi_diff).real


def coupling_entry(omega_m: float, omega_n: float, omega_p: float, tau: float) -> float:
    """Symmetrized per-mode phase between unit tones at omega_m, omega_n."""
    t_mn = ordered_phase_grid(np.array([omega_m]), np.array([omega_n]), omega_p, tau)[0, 0]
    t_nm = ordered_phase_grid(np.array([omega_n]), np.array([omega_m]), omega_p, tau)[0, 0]
    return 0.5 * (t_mn + t_nm)


@dataclass(frozen=True)
class PhaseKernels:
    """One symmetric L x L phase matrix per motional mode."""

    basis: BasisSet
    per_mode: tuple[np.ndarray, ...]

    @property
    def mode_count(self) -> int:
        return len(self.per_mode)


def build_kernels(basis: BasisSet, spectrum: ModeSpectrum) -> PhaseKernels:
    """Symmetrized kernels for every mode of the spectrum."""
    omega = basis.frequencies
    mats = []
    for omega_p in spectrum.mode_frequencies:
        ordered = ordered_phase_grid(omega, omega, float(omega_p), basis.tau)
        mats.append(0.5 * (ordered + ordered.T))
    return PhaseKernels(basis=basis, per_mode=tuple(mats))


def pair_kernel(kernels: PhaseKernels, spectrum: ModeSpectrum, i: int, j: int) -> np.ndarray:
    """Coupling-weighted kernel sum for ion pair (i, j): sum_p eta_ip eta_jp S_p."""
    if i == j:
        raise InvalidPair(f"ion pair requires two distinct ions, got ({i}, {j})")
    eta = spectrum.lamb_dicke
    out = np.zeros_like(kernels.per_mode[0])
    for p, s_p in enumerate(kernels.per_mode):
        out += eta[i, p] * eta[j, p] * s_p
    return out


def entangling_angle(v_i: np.ndarray, v_j: np.ndarray, i: int, j: int,
                     kernels: PhaseKernels, spectrum: ModeSpectrum) -> float:
    """Entangling angle (rad) between pulse v_i on ion i and v_j on ion j."""
    if i == j:
        raise InvalidPair(f"entangling angle needs distinct ions, got ({i}, {j})")
    eta = spectrum.lamb_dicke
    total = 0.0
    for p, s_p in enumerate(kernels.per_mode):
        total += eta[i, p] * eta[j, p] * float(v_i @ s_p @ v_j)
    return total
