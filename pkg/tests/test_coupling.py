"""Phase-kernel closed forms against quadrature oracles."""

import numpy as np
import pytest
from scipy.integrate import quad

from ionpulse.basis import build_basis, build_constraint_matrix, null_space
from ionpulse.coupling import (build_kernels, coupling_entry, entangling_angle,
                               ordered_phase_grid, pair_kernel)
from ionpulse.errors import InvalidPair
from ionpulse.verify import WaveformSet, coeff_waveform

TWO_PI = 2 * np.pi


def nested_quadrature(omega_m, omega_n, omega_p, tau):
    """Slow ordered double integral; only affordable for short windows."""

    def inner(t2):
        return quad(lambda t1: np.sin(omega_m * t1) * np.sin(omega_p * (t1 - t2)),
                    0, t2, limit=600)[0]

    return 4 * quad(lambda t2: np.sin(omega_n * t2) * inner(t2), 0, tau,
                    limit=600)[0]


def test_entry_is_symmetric():
    a = coupling_entry(TWO_PI * 0.81, TWO_PI * 0.93, TWO_PI * 0.9, 11.0)
    b = coupling_entry(TWO_PI * 0.93, TWO_PI * 0.81, TWO_PI * 0.9, 11.0)
    assert a == b


def test_entry_matches_nested_quadrature_short_window():
    cases = [
        (TWO_PI * 0.8, TWO_PI * 0.95, TWO_PI * 0.9, 7.3),
        (TWO_PI * 1.1, TWO_PI * 1.1, TWO_PI * 1.1, 5.0),        # full resonance
        (TWO_PI * 0.7, TWO_PI * 0.9, TWO_PI * 0.9 + 1e-7, 6.0),  # near resonance
    ]
    for omega_m, omega_n, omega_p, tau in cases:
        sym = 0.5 * (nested_quadrature(omega_m, omega_n, omega_p, tau)
                     + nested_quadrature(omega_n, omega_m, omega_p, tau))
        value = coupling_entry(omega_m, omega_n, omega_p, tau)
        assert value == pytest.approx(sym, rel=1e-9, abs=1e-12)


def test_entry_agreement_on_random_tuples(rng):
    """Closed form vs the panel-quadrature oracle, including near-resonant."""
    checked = 0
    for k in range(100):
        tau = rng.uniform(5.0, 40.0)
        omega_m = TWO_PI * rng.uniform(0.3, 3.0)
        omega_n = TWO_PI * rng.uniform(0.3, 3.0)
        if k % 4 == 0:
            # exercise the limit branches down to 1e-6 rad/us
            omega_p = omega_n + rng.choice([-1, 1]) * 10.0 ** rng.uniform(-6, -3)
        elif k % 4 == 1:
            omega_p = omega_m + rng.choice([-1, 1]) * 10.0 ** rng.uniform(-6, -3)
        else:
            omega_p = TWO_PI * rng.uniform(0.3, 3.0)
        ordered = ordered_phase_grid(np.array([omega_m]), np.array([omega_n]),
                                     omega_p, tau)[0, 0]
        idx_m = np.array([1])
        oracle = WaveformSet({0: lambda t, w=omega_m: np.sin(w * t),
                              1: lambda t, w=omega_n: np.sin(w * t)},
                             tau, tau * (omega_m + omega_n + omega_p) / TWO_PI)
        reference = oracle.ordered_phase(0, 1, omega_p, tol=1e-11 * max(1.0, abs(ordered)))
        assert ordered == pytest.approx(reference, rel=1e-10, abs=2e-10)
        checked += 1
    assert checked == 100


def test_kernel_shapes_and_symmetry(fixture7, basis300, space300):
    kernels = space300.kernels
    assert kernels.mode_count == 7
    for s_p in kernels.per_mode:
        assert s_p.shape == (127, 127)
        assert np.array_equal(s_p, s_p.T)


def test_quadratic_form_scaling(space300, rng):
    s = space300.kernels.per_mode[2]
    v = rng.normal(size=127)
    assert (3.0 * v) @ s @ (3.0 * v) == pytest.approx(9.0 * (v @ s @ v), rel=1e-13)
    assert np.zeros(127) @ s @ v == 0.0


def test_quadratic_form_matches_oracle(fixture7, basis300, space300, rng):
    """v^T S_p v equals the ordered double integral of the sampled pulse."""
    tau = basis300.tau
    v = rng.normal(size=basis300.size)
    v /= np.linalg.norm(v)
    wave = coeff_waveform(tau, basis300.indices, v)
    oscillations = tau * (basis300.indices[-1] / tau + 2.94)
    wset = WaveformSet({0: wave}, tau, oscillations)
    for p in (0, 3, 6):
        omega = float(fixture7.mode_frequencies[p])
        closed = float(v @ space300.kernels.per_mode[p] @ v)
        reference = wset.ordered_phase(0, 0, omega, tol=1e-8 * abs(closed))
        assert closed == pytest.approx(reference, rel=1e-8)


def test_entangling_angle_contract(fixture7, space300, rng):
    v = rng.normal(size=127)
    w = rng.normal(size=127)
    kernels = space300.kernels
    assert entangling_angle(v, np.zeros(127), 1, 3, kernels, fixture7) == 0.0
    base = entangling_angle(v, w, 1, 3, kernels, fixture7)
    assert entangling_angle(2.5 * v, w, 1, 3, kernels, fixture7) == pytest.approx(
        2.5 * base, rel=1e-12)
    expected = float(v @ pair_kernel(kernels, fixture7, 1, 3) @ w)
    assert base == pytest.approx(expected, rel=1e-12)
    with pytest.raises(InvalidPair):
        entangling_angle(v, w, 2, 2, kernels, fixture7)


def test_disjoint_band_null_vectors_have_zero_cross_form(fixture7, basis300,
                                                         space300, rng):
    """Pulses decoupled inside disjoint bands: v^T S_p w = 0 for every mode."""
    m = build_constraint_matrix(basis300, fixture7)
    cols_a = np.arange(0, 40)
    cols_b = np.arange(55, 105)
    null_a = null_space(m[:, cols_a])
    null_b = null_space(m[:, cols_b])
    v = np.zeros(basis300.size)
    w = np.zeros(basis300.size)
    v[cols_a] = null_a.matrix @ rng.normal(size=null_a.dimension)
    w[cols_b] = null_b.matrix @ rng.normal(size=null_b.dimension)
    v /= np.linalg.norm(v)
    w /= np.linalg.norm(w)
    for s_p in space300.kernels.per_mode:
        assert abs(v @ s_p @ w) < 1e-9
