"""Sine basis window, displacement integrals, constraints, null space."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from ionpulse.basis import (BasisSet, build_basis, build_constraint_matrix,
                            build_null_basis, displacement_integral, null_space)
from ionpulse.chain import ModeSpectrum
from ionpulse.errors import EmptyBasis, InsufficientDOF
from ionpulse.verify import (WaveformSet, coeff_waveform, detuning_scan,
                             displacement_residual)

TWO_PI = 2 * np.pi


def window_oracle(f_lo, f_hi, guard, tau):
    """Independent ceil/floor arithmetic for the index window."""
    lo = math.ceil((f_lo - guard) * tau - 1e-9)
    hi = math.floor((f_hi + guard) * tau + 1e-9)
    return lo, hi


def single_mode_spectrum(f_mhz):
    return ModeSpectrum(mode_frequencies=np.array([TWO_PI * f_mhz]),
                        lamb_dicke=np.array([[0.1]]), source="computed")


def test_window_tau300(fixture7, basis300):
    lo, hi = window_oracle(2.70769, 2.93070, 0.1, 300.0)
    assert (basis300.indices[0], basis300.indices[-1]) == (lo, hi) == (783, 909)
    assert basis300.size == 127


def test_window_tau2000(fixture7):
    basis = build_basis(2000.0, fixture7)
    lo, hi = window_oracle(2.70769, 2.93070, 0.1, 2000.0)
    assert (basis.indices[0], basis.indices[-1]) == (lo, hi)
    assert basis.size == hi - lo + 1 == 846


def test_empty_window_raises():
    with pytest.raises(EmptyBasis):
        build_basis(300.0, single_mode_spectrum(2.93070), guard_mhz=0.0)


def test_basis_vanishes_at_ends(basis300, rng):
    coeffs = rng.normal(size=basis300.size)
    vals = basis300.sample(coeffs, np.array([0.0]))
    assert vals[0] == 0.0


def test_displacement_integral_orthogonal_tone():
    tau = 300.0
    omega_l = TWO_PI * 850 / tau
    omega_p = TWO_PI * 851 / tau
    assert abs(displacement_integral(omega_l, omega_p, tau)) < 1e-9 * tau


def test_displacement_integral_resonant_tone():
    tau = 300.0
    omega = TWO_PI * 850 / tau
    assert displacement_integral(omega, omega, tau) == pytest.approx(1j * tau / 2)


def test_displacement_integral_first_derivative_vs_quadrature():
    tau, omega_p, omega_l = 300.0, TWO_PI * 2.80, TWO_PI * 2.81

    def integrand(t):
        return (-1j * t) * np.sin(omega_l * t) * np.exp(1j * omega_p * t)

    re = quad(lambda t: integrand(t).real, 0, tau, limit=20000)[0]
    im = quad(lambda t: integrand(t).imag, 0, tau, limit=20000)[0]
    value = displacement_integral(omega_l, omega_p, tau, order=1)
    assert abs(value - (re + 1j * im)) < 1e-10 * abs(value)


@pytest.mark.parametrize("order,rows", [(0, 14), (2, 42)])
def test_constraint_matrix_row_count(fixture7, basis300, order, rows):
    basis = BasisSet(tau=basis300.tau, indices=basis300.indices,
                     stabilization_order=order)
    assert build_constraint_matrix(basis, fixture7).shape == (rows, 127)


def test_constraint_rows_at_resonant_mode():
    # mode frequency exactly on a basis harmonic: the Re row vanishes and
    # the Im row is tau/2 at the resonant column
    tau = 300.0
    spectrum = single_mode_spectrum(850 / tau)
    basis = build_basis(tau, spectrum, guard_mhz=0.01)
    m = build_constraint_matrix(basis, spectrum)
    col = int(np.flatnonzero(basis.indices == 850)[0])
    assert abs(m[0, col]) < 1e-9 * tau
    assert m[1, col] == pytest.approx(tau / 2, rel=1e-12)
    off = np.delete(m, col, axis=1)
    assert np.max(np.abs(off)) < 1e-8 * tau


def test_null_space_dimensions(fixture7, basis300, space300):
    # one independent complex constraint per mode and derivative order:
    # rank P(K+1), dimension L - P(K+1)
    assert space300.null.rank == 7
    assert space300.null.dimension == 120
    basis_k1 = BasisSet(tau=300.0, indices=basis300.indices, stabilization_order=1)
    null_k1 = build_null_basis(basis_k1, fixture7)
    assert null_k1.rank == 14
    assert null_k1.dimension == 113


def test_null_space_invariants(fixture7, basis300, space300):
    m = build_constraint_matrix(basis300, fixture7)
    a = space300.null.matrix
    assert np.max(np.abs(m @ a)) < 1e-11 * np.max(np.abs(m))
    assert np.max(np.abs(a.T @ a - np.eye(a.shape[1]))) < 1e-12


def test_duplicated_mode_rows_reduce_rank(fixture7, basis300):
    m = build_constraint_matrix(basis300, fixture7)
    m[12] = m[10]
    m[13] = m[11]  # mode 7's rows replaced by a copy of mode 6's
    null = null_space(m)
    assert null.rank == 6
    assert null.dimension == 121


def test_null_space_requires_slack():
    with pytest.raises(InsufficientDOF):
        null_space(np.eye(5))


def test_null_vectors_decouple_by_quadrature(fixture7, basis300, space300, rng):
    tau = basis300.tau
    oscillations = tau * (basis300.indices[-1] / tau + 2.94)
    waves = {}
    budgets = {}
    for k in range(3):
        coeffs = space300.null.matrix @ rng.normal(size=space300.null.dimension)
        waves[k] = coeff_waveform(tau, basis300.indices, coeffs)
        budgets[k] = 1e-9 * np.linalg.norm(coeffs) * tau
    wset = WaveformSet(waves, tau, oscillations)
    for k in waves:
        for omega in fixture7.mode_frequencies:
            value = wset.residual(k, float(omega), tol=budgets[k] * 1e-3)
            assert abs(value) < budgets[k]


def test_stabilized_null_vectors_flatten_detuning(fixture7, basis300, rng):
    # with one vanishing derivative the residual grows ~ delta^2
    basis_k1 = BasisSet(tau=300.0, indices=basis300.indices, stabilization_order=1)
    null_k1 = build_null_basis(basis_k1, fixture7)
    coeffs = null_k1.matrix @ rng.normal(size=null_k1.dimension)
    coeffs /= np.linalg.norm(coeffs)
    wave = coeff_waveform(300.0, basis300.indices, coeffs)
    oscillations = 300.0 * 6.1
    deltas = np.logspace(-4, -2, 5)
    omega = float(fixture7.mode_frequencies[3])
    values = detuning_scan(wave, 300.0, omega, deltas, oscillations, tol=1e-13)
    slope = np.polyfit(np.log(deltas), np.log(values), 1)[0]
    assert slope >= 1.8
