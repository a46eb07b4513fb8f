"""Quadrature oracle: independent verification of pulse solutions.

Everything a solution promises is re-derived here from sampled
time-domain waveforms: residual spin-motion displacement per ion and
mode, the full entangling-angle matrix from the ordered double integral,
RMS power, and displacement under mode-frequency detuning.  No code is
shared with the closed forms in basis.py or coupling.py; agreement
between the two paths is evidence, not tautology.

All quadrature runs on shared Chebyshev panel grids; every reported
value is confirmed by comparing two grid resolutions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain import TWO_PI, ModeSpectrum
from .errors import NumericalFailure
from .quadrature import PanelGrid, cumulative_on_grid, grid_for, integrate_on_grid
from .solver import PulseSolution

_CHUNK = 16384
_MAX_LEVEL = 6

DEFAULT_ALPHA_REL = 1e-9       # |alpha| budget in units of gbar * tau
DEFAULT_CHI_TARGET_TOL = 1e-6  # rad
DEFAULT_CHI_CROSS_TOL = 1e-6   # rad


def coeff_waveform(tau: float, indices: np.ndarray, coeffs: np.ndarray):
    """Time-domain evaluator for a sine-series pulse (chunked)."""
    omega = TWO_PI * np.asarray(indices, dtype=float) / tau
    coeffs = np.asarray(coeffs, dtype=float)

    def wave(times: np.ndarray) -> np.ndarray:
        t = np.asarray(times, dtype=float)
        flat = t.reshape(-1)
        out = np.empty(flat.size)
        for start in range(0, flat.size, _CHUNK):
            chunk = flat[start:start + _CHUNK]
            out[start:start + _CHUNK] = np.sin(np.outer(chunk, omega)) @ coeffs
        return out.reshape(t.shape)

    return wave


class WaveformSet:
    """Waveforms sampled on a family of refining panel grids.

    Sample arrays, modulation phases, and running overlaps are cached
    per refinement level, so scanning many modes and ion pairs costs a
    handful of vector operations each instead of a fresh quadrature.
    """

    def __init__(self, waves: dict[int, object], tau: float, oscillations: float):
        self.tau = tau
        self.oscillations = max(float(oscillations), 1.0)
        self._waves = dict(waves)
        self._grids: list[PanelGrid] = [grid_for(0.0, tau, self.oscillations)]
        self._samples: list[dict[int, np.ndarray]] = [{}]
        self._phases: list[dict[float, np.ndarray]] = [{}]
        self._overlaps: list[dict[tuple[int, float], np.ndarray]] = [{}]

    def grid(self, level: int) -> PanelGrid:
        while len(self._grids) <= level:
            self._grids.append(self._grids[-1].refined())
            self._samples.append({})
            self._phases.append({})
            self._overlaps.append({})
        return self._grids[level]

    def samples(self, ion: int, level: int) -> np.ndarray:
        grid = self.grid(level)
        cache = self._samples[level]
        if ion not in cache:
            cache[ion] = self._waves[ion](grid.times)
        return cache[ion]

    def _phase(self, omega: float, level: int) -> np.ndarray:
        """exp(+i omega t) on the level grid."""
        grid = self.grid(level)
        cache = self._phases[level]
        if omega not in cache:
            cache[omega] = np.exp(1j * omega * grid.times)
        return cache[omega]

    def _converge(self, per_level, tol: float):
        value = per_level(0)
        for level in range(1, _MAX_LEVEL + 1):
            fine = per_level(level)
            if abs(fine - value) <= tol:
                return fine
            value = fine
        raise NumericalFailure(f"quadrature did not converge to {tol:g}")

    def residual(self, ion: int, omega: float, tol: float) -> complex:
        """integral_0^tau g(t) exp(-i omega t) dt."""

        def at(level):
            vals = self.samples(ion, level) * np.conj(self._phase(omega, level))
            return integrate_on_grid(self.grid(level), vals)

        return self._converge(at, tol)

    def rms(self, ion: int) -> float:
        def at(level):
            vals = self.samples(ion, level) ** 2
            return integrate_on_grid(self.grid(level), vals)

        value = self._converge(at, tol=1e-14 * max(self.tau, 1.0))
        return float(np.sqrt(max(value.real, 0.0) / self.tau))

    def _running_overlap(self, ion: int, omega: float, level: int) -> np.ndarray:
        grid = self.grid(level)
        key = (ion, omega)
        cache = self._overlaps[level]
        if key not in cache:
            vals = self.samples(ion, level) * self._phase(omega, level)
            cache[key] = cumulative_on_grid(grid, vals)
        return cache[key]

    def ordered_phase(self, inner: int, outer: int, omega: float, tol: float) -> float:
        """4 x ordered double integral of the two-pulse angle on one mode."""

        def at(level):
            c = self._running_overlap(inner, omega, level)
            mod = (np.conj(self._phase(omega, level)) * c).imag
            vals = self.samples(outer, level) * mod
            return 4.0 * integrate_on_grid(self.grid(level), vals).real

        return float(np.real(self._converge(at, tol)))

    def pair_angle(self, i: int, j: int, spectrum: ModeSpectrum, tol: float) -> float:
        """Mode-summed symmetrized entangling angle between ions i and j."""
        eta = spectrum.lamb_dicke
        total = 0.0
        for p, omega in enumerate(spectrum.mode_frequencies):
            weight = eta[i, p] * eta[j, p]
            if weight == 0.0:
                continue
            t_ij = self.ordered_phase(i, j, float(omega), tol)
            t_ji = self.ordered_phase(j, i, float(omega), tol)
            total += weight * 0.5 * (t_ij + t_ji)
        return total


def solution_waveforms(solution: PulseSolution, spectrum: ModeSpectrum) -> WaveformSet:
    """WaveformSet over the composed per-ion waveforms of a solution."""
    basis = solution.basis
    ions = solution.ions()
    waves = {ion: coeff_waveform(basis.tau, basis.indices, solution.ion_coeffs(ion))
             for ion in ions}
    max_line_mhz = float(np.max(basis.indices)) / basis.tau if basis.size else 0.0
    max_mode_mhz = float(np.max(spectrum.frequencies_mhz))
    return WaveformSet(waves, basis.tau, basis.tau * (max_line_mhz + max_mode_mhz))


def displacement_residual(wave, omega_p: float, tau: float,
                          oscillations: float, tol: float) -> complex:
    """One-off residual for a bare waveform callable."""
    ws = WaveformSet({0: wave}, tau, oscillations)
    return ws.residual(0, omega_p, tol)


def rms_amplitude(wave, tau: float, oscillations: float) -> float:
    ws = WaveformSet({0: wave}, tau, oscillations)
    return ws.rms(0)


def detuning_scan(wave, tau: float, omega_p: float, deltas,
                  oscillations: float, tol: float) -> np.ndarray:
    """|residual| at omega_p + delta for each delta (rad/us)."""
    ws = WaveformSet({0: wave}, tau, oscillations)
    return np.array([abs(ws.residual(0, omega_p + float(d), tol))
                     for d in np.asarray(deltas, dtype=float)])


@dataclass
class VerificationReport:
    """Oracle outcome for one solution.

    Internal indices are 0-based; to_dict emits the 1-based labels used
    by every file format.
    """

    ions: list[int]
    mode_frequencies: np.ndarray
    alpha: dict[int, np.ndarray]            # ion -> complex residual per mode
    alpha_limits: dict[int, float]          # ion -> pass threshold (rad us)
    chi: np.ndarray                         # symmetric, all ions of the chain
    gbar_ion: dict[int, float]
    gbar_gate: list[float]
    targets: dict[tuple[int, int], float]   # achieved angles by pair
    detuning: list[tuple[float, int, float]] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def max_alpha_ratio(self) -> float:
        worst = 0.0
        for ion, vals in self.alpha.items():
            if self.alpha_limits[ion] > 0 and vals.size:
                worst = max(worst, float(np.max(np.abs(vals))) / self.alpha_limits[ion])
        return worst

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "failures": list(self.failures),
            "ions": [int(i) + 1 for i in self.ions],
            "mode_frequencies_mhz": (self.mode_frequencies / TWO_PI).tolist(),
            "alpha_abs": {str(i + 1): np.abs(v).tolist() for i, v in self.alpha.items()},
            "alpha_limits": {str(i + 1): float(v) for i, v in self.alpha_limits.items()},
            "chi": self.chi.tolist(),
            "gbar_ion": {str(i + 1): float(v) for i, v in self.gbar_ion.items()},
            "gbar_gate": [float(v) for v in self.gbar_gate],
            "achieved": {f"{i + 1}-{j + 1}": float(v)
                         for (i, j), v in self.targets.items()},
            "detuning": [{"delta_mhz": d, "mode_index": m + 1, "alpha_abs": a}
                         for d, m, a in self.detuning],
        }


DEFAULT_SCAN_MHZ = (-2e-3, -1e-3, -5e-4, 5e-4, 1e-3, 2e-3)


def verify_solution(solution: PulseSolution, spectrum: ModeSpectrum,
                    alpha_rel: float = DEFAULT_ALPHA_REL,
                    chi_target_tol: float = DEFAULT_CHI_TARGET_TOL,
                    chi_cross_tol: float = DEFAULT_CHI_CROSS_TOL,
                    scan_deltas_mhz: tuple[float, ...] = ()) -> VerificationReport:
    """Re-derive every promise of a solution by quadrature and grade it.

    scan_deltas_mhz adds a drift table: worst-ion |residual| at each
    mode frequency offset (informational, not graded).
    """
    ions = solution.ions()
    tau = solution.basis.tau
    wset = solution_waveforms(solution, spectrum)

    gbar_ion = {ion: wset.rms(ion) for ion in ions}
    gbar_gate = solution.gate_rms()

    failures: list[str] = []
    alpha: dict[int, np.ndarray] = {}
    alpha_limits: dict[int, float] = {}
    for ion in ions:
        limit = alpha_rel * gbar_ion[ion] * tau
        alpha_limits[ion] = limit
        tol = max(limit * 1e-3, 1e-16)
        vals = np.array([wset.residual(ion, float(w), tol)
                         for w in spectrum.mode_frequencies])
        alpha[ion] = vals
        worst = float(np.max(np.abs(vals))) if vals.size else 0.0
        if worst > limit:
            failures.append(
                f"ion {ion}: residual displacement {worst:.3e} exceeds {limit:.3e}")

    n = solution.ion_count
    chi = np.zeros((n, n))
    targeted = {g.pair: g.achieved for g in solution.gates}
    angle_tol = 0.05 * min(chi_target_tol, chi_cross_tol)
    for a_pos, a in enumerate(ions):
        for b in ions[a_pos + 1:]:
            val = wset.pair_angle(a, b, spectrum, tol=angle_tol)
            chi[a, b] = chi[b, a] = val
            if (a, b) in targeted:
                want = targeted[(a, b)]
                if abs(val - want) > chi_target_tol:
                    failures.append(
                        f"gate ({a},{b}): angle {val:.9f} deviates from {want:.9f}")
            elif abs(val) > chi_cross_tol:
                failures.append(f"pair ({a},{b}): stray angle {val:.3e}")

    scan: list[tuple[float, int, float]] = []
    scan_tol = max(min(alpha_limits.values(), default=1e-12) * 1e-3, 1e-16)
    for delta_mhz in scan_deltas_mhz:
        delta = TWO_PI * delta_mhz
        for p, w in enumerate(spectrum.mode_frequencies):
            worst = max((abs(wset.residual(ion, float(w) + delta, scan_tol))
                         for ion in ions), default=0.0)
            scan.append((float(delta_mhz), p, worst))

    return VerificationReport(
        ions=ions, mode_frequencies=spectrum.mode_frequencies.copy(),
        alpha=alpha, alpha_limits=alpha_limits, chi=chi, gbar_ion=gbar_ion,
        gbar_gate=gbar_gate, targets=targeted, detuning=scan, failures=failures)
