"""Motional-mode data for a linear ion chain.

A chain is described either by a parametric harmonic trap model (axial +
transverse confinement, Coulomb repulsion) or by tabulated fixtures for
7/9/11/13 ions.  All frequencies are stored internally as angular
frequencies in rad/us; file and API I/O uses MHz (omega / 2 pi).

The transverse spectrum of a stable chain has the center-of-mass mode at
the bare transverse frequency (highest mode); per-ion couplings scale as
eta_ip = b_ip * eta_scale * sqrt(omega_com / omega_p) with b the
orthonormal eigenvectors of the transverse stiffness matrix.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import NumericalFailure, UnstableChain, UnsupportedFixture

TWO_PI = 2.0 * np.pi

FIXTURE_SIZES = (7, 9, 11, 13)

_EQUILIBRIUM_TOL = 1e-12
_EQUILIBRIUM_MAX_ITER = 200


@dataclass(frozen=True)
class TrapModel:
    """Parametric trap: angular frequencies in rad/us, unit-mass chain.

    eta_scale is the Lamb-Dicke coupling a single ion would have on the
    center-of-mass mode, before the per-ion 1/sqrt(N) participation.
    """

    ion_count: int
    axial_frequency: float
    transverse_frequency: float
    lamb_dicke_scale: float

    def __post_init__(self):
        if self.ion_count < 1:
            raise ValueError("ion_count must be >= 1")
        if not (self.transverse_frequency > self.axial_frequency > 0):
            raise ValueError("need transverse > axial > 0 for a linear chain")

    @classmethod
    def from_mhz(cls, ion_count: int, axial_mhz: float, transverse_mhz: float,
                 eta_scale: float) -> "TrapModel":
        return cls(ion_count, TWO_PI * axial_mhz, TWO_PI * transverse_mhz, eta_scale)


@dataclass(frozen=True)
class ModeSpectrum:
    """Transverse mode frequencies (rad/us, ascending) and couplings.

    lamb_dicke has shape (N, P) with P == N; source is "computed" or
    "fixture".
    """

    mode_frequencies: np.ndarray
    lamb_dicke: np.ndarray
    source: str

    @property
    def ion_count(self) -> int:
        return self.lamb_dicke.shape[0]

    @property
    def mode_count(self) -> int:
        return self.mode_frequencies.size

    @property
    def frequencies_mhz(self) -> np.ndarray:
        return self.mode_frequencies / TWO_PI


def _axial_gradient(u: np.ndarray) -> np.ndarray:
    """Gradient of the dimensionless chain potential at positions u."""
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    return u - np.sum(np.sign(diff) / diff**2, axis=1)


def _axial_hessian(u: np.ndarray) -> np.ndarray:
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    inv3 = 1.0 / np.abs(diff) ** 3
    h = -2.0 * inv3
    np.fill_diagonal(h, 1.0 + 2.0 * np.sum(inv3, axis=1))
    return h


def solve_equilibrium(model: TrapModel) -> np.ndarray:
    """Equilibrium axial positions in the standard Coulomb length scale.

    Damped Newton iteration; converges to |gradient| < 1e-12.  Positions
    come out strictly increasing and symmetric about the trap center.
    """
    n = model.ion_count
    if n == 1:
        return np.zeros(1)
    # Empirical spacing scale keeps the initial guess close enough for
    # Newton over the chain lengths of interest.
    spacing = 2.018 / n**0.559
    u = (np.arange(n) - (n - 1) / 2.0) * spacing
    grad = _axial_gradient(u)
    for _ in range(_EQUILIBRIUM_MAX_ITER):
        if np.max(np.abs(grad)) < _EQUILIBRIUM_TOL:
            break
        step = np.linalg.solve(_axial_hessian(u), grad)
        scale = 1.0
        for _ in range(40):
            trial = u - scale * step
            if np.all(np.diff(trial) > 0):
                trial_grad = _axial_gradient(trial)
                if np.max(np.abs(trial_grad)) < np.max(np.abs(grad)) or scale < 1e-6:
                    u, grad = trial, trial_grad
                    break
            scale *= 0.5
        else:
            raise NumericalFailure("equilibrium line search failed")
    else:
        raise NumericalFailure(
            f"equilibrium Newton iteration did not converge for N={n}")
    # Symmetrize against roundoff: the potential is even in u.
    u = (u - u[::-1]) / 2.0
    return u


def _transverse_coupling(u: np.ndarray) -> np.ndarray:
    """Dimensionless transverse stiffness correction matrix (PSD)."""
    n = u.size
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    inv3 = 1.0 / np.abs(diff) ** 3
    t = -inv3
    np.fill_diagonal(t, np.sum(inv3, axis=1))
    return t


def _fix_eigenvector_signs(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of each column positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def compute_modes(model: TrapModel) -> ModeSpectrum:
    """Diagonalize the transverse stiffness of the equilibrium chain."""
    u = solve_equilibrium(model)
    t = _transverse_coupling(u)
    mu, vec = np.linalg.eigh(t)
    # One exact zero eigenvalue (uniform translation); clamp roundoff so
    # the center-of-mass mode lands exactly on the trap frequency.
    if mu.size > 1 and abs(mu[0]) < 1e-9 * max(mu[-1], 1.0):
        mu[0] = 0.0
    elif mu.size == 1:
        mu[0] = 0.0
    w2 = model.transverse_frequency**2 - model.axial_frequency**2 * mu
    if np.any(w2 <= 0):
        raise UnstableChain(
            f"chain of N={model.ion_count} buckles: increase transverse confinement")
    omega = np.sqrt(w2)
    order = np.argsort(omega)
    omega = omega[order]
    vec = _fix_eigenvector_signs(vec[:, order])
    eta = vec * model.lamb_dicke_scale * np.sqrt(omega[-1] / omega)[None, :]
    return ModeSpectrum(mode_frequencies=omega, lamb_dicke=eta, source="computed")


def _read_fixture_csv(name: str) -> list[list[str]]:
    path = resources.files("ionpulse.data").joinpath(name)
    with path.open("r", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[1:]


def load_fixture(n: int) -> ModeSpectrum:
    """Tabulated spectrum for n in {7, 9, 11, 13}.

    Frequencies are tabulated as omega/2pi in MHz and converted to
    rad/us; couplings are used exactly as tabulated.
    """
    if n not in FIXTURE_SIZES:
        raise UnsupportedFixture(f"no fixture for n={n}; available: {FIXTURE_SIZES}")
    freq_rows = _read_fixture_csv(f"modes_{n}.csv")
    omega = TWO_PI * np.array([float(r[1]) for r in freq_rows])
    eta_rows = _read_fixture_csv(f"eta_{n}.csv")
    eta = np.array([[float(v) for v in r[1:]] for r in eta_rows])
    if eta.shape != (n, n) or omega.size != n:
        raise UnsupportedFixture(f"fixture data for n={n} is malformed")
    return ModeSpectrum(mode_frequencies=omega, lamb_dicke=eta, source="fixture")


def fixture_mode_vectors(spectrum: ModeSpectrum) -> np.ndarray:
    """Recover the bare eigenvector matrix from tabulated couplings.

    Undoes the per-mode sqrt(omega_com/omega_p) scale and the COM
    coupling so the columns can be checked for orthonormality.
    """
    omega = spectrum.mode_frequencies
    eta_com = spectrum.lamb_dicke[0, -1]
    n = spectrum.ion_count
    scale = eta_com * np.sqrt(n) * np.sqrt(omega[-1] / omega)
    return spectrum.lamb_dicke / scale[None, :]
