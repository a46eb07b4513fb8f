"""Sign sequencing and disjoint-band protocols."""

import numpy as np
import pytest

from ionpulse.basis import build_basis
from ionpulse.coupling import entangling_angle
from ionpulse.errors import InsufficientDOF, InvalidCount, InvalidSchedule
from ionpulse.protocols import (disjoint_synthesize, partition_frequencies,
                                sequencing_protocol, sequencing_schedule,
                                walsh_signs)
from ionpulse.quadrature import adaptive_integral
from ionpulse.solver import GateSpec, coefficient_chi_matrix, synthesize
from ionpulse.verify import coeff_waveform

PI2 = np.pi / 2


def test_walsh_base_cases():
    assert walsh_signs(1).tolist() == [[1]]
    assert walsh_signs(2).tolist() == [[1, 1], [1, -1]]


@pytest.mark.parametrize("count", [1, 2, 4, 8, 16, 32, 64])
def test_walsh_rows_exactly_orthogonal(count):
    g = walsh_signs(count)
    assert g[0].tolist() == [1] * count
    assert np.array_equal(g @ g.T, count * np.eye(count, dtype=int))


@pytest.mark.parametrize("count", [0, 3, 6, 12])
def test_walsh_rejects_non_powers(count):
    with pytest.raises(InvalidCount):
        walsh_signs(count)


def test_schedule_requires_matching_counts(fixture7, basis300, space300):
    sol = synthesize(GateSpec.create([(1, 3)]), fixture7, basis300, space=space300)
    with pytest.raises(InvalidSchedule):
        sequencing_schedule(sol, walsh_signs(2))


def test_sequencing_slot_accumulation(fixture7, basis300, space300):
    """Slot angles are target/count and cross terms cancel across slots."""
    spec = GateSpec.create([(1, 3), (2, 4)])
    sched = sequencing_protocol(spec, fixture7, basis300, space=space300)
    assert sched.slot_count == 2
    assert sched.slot_scale == pytest.approx(1 / np.sqrt(2))
    assert sched.total_duration == 2 * basis300.tau
    n = fixture7.ion_count
    total = np.zeros((n, n))
    for k in range(sched.slot_count):
        chi = coefficient_chi_matrix(sched.slot_solution(k), space300)
        for g in sched.base.gates:
            assert chi[g.pair] == pytest.approx(g.achieved / 2, rel=1e-12)
        total += chi
    for g in sched.base.gates:
        assert total[g.pair] == pytest.approx(g.achieved, rel=1e-12)
    targeted = {g.pair for g in sched.base.gates}
    ions = sorted({i for g in sched.base.gates for i in g.pair})
    for a in ions:
        for b in ions:
            if a < b and (a, b) not in targeted:
                assert abs(total[a, b]) < 1e-12


def test_partition_single_gate_gets_whole_basis(fixture7, basis300, space300):
    sol = synthesize(GateSpec.create([(2, 4)]), fixture7, basis300, space=space300)
    part = partition_frequencies(basis300, sol.assignment, fixture7)
    lo, hi = part.bands[0]
    assert (lo, hi) == (basis300.indices[0], basis300.indices[-1])


def test_partition_two_gates(fixture7, basis300, space300):
    sol = synthesize(GateSpec.create([(1, 3), (2, 4)]), fixture7, basis300,
                     space=space300)
    part = partition_frequencies(basis300, sol.assignment, fixture7)
    (lo1, hi1), (lo2, hi2) = part.bands
    assert hi1 < lo2 or hi2 < lo1  # disjoint
    for k, (lo, hi) in enumerate(part.bands):
        assert hi - lo + 1 >= 15  # 2 P + 1
        center_mhz = fixture7.frequencies_mhz[part.modes[k]]
        band_center = (lo + hi) / 2.0
        assert abs(band_center - center_mhz * basis300.tau) <= 1.0


def test_partition_insufficient_indices(fixture7):
    basis = build_basis(30.0, fixture7)  # only ~13 harmonics in window
    spec = GateSpec.create([(1, 3), (2, 4)])
    with pytest.raises(InsufficientDOF):
        disjoint_synthesize(spec, fixture7, basis)


def test_disjoint_cross_terms_vanish(fixture7, basis300, space300):
    spec = GateSpec.create([(1, 3), (2, 4)])
    sol = disjoint_synthesize(spec, fixture7, basis300)
    chi = coefficient_chi_matrix(sol, space300)
    for g in sol.gates:
        assert chi[g.pair] == pytest.approx(g.achieved, abs=1e-12)
    targeted = {g.pair for g in sol.gates}
    ions = sol.ions()
    for a in ions:
        for b in ions:
            if a < b and (a, b) not in targeted:
                assert abs(chi[a, b]) < 1e-9


def test_disjoint_band_pulses_are_time_orthogonal(fixture7, basis300):
    spec = GateSpec.create([(1, 3), (2, 4)])
    sol = disjoint_synthesize(spec, fixture7, basis300)
    tau = basis300.tau
    g = coeff_waveform(tau, basis300.indices, sol.gates[0].coeffs)
    h = coeff_waveform(tau, basis300.indices, sol.gates[1].coeffs)
    value, _ = adaptive_integral(lambda t: g(t) * h(t), 0.0, tau,
                                 oscillations=tau * 6.1, tol=1e-13)
    assert abs(value) < 1e-12 * tau


def test_swapped_pulses_miss_targets(fixture7, basis300, space300):
    """Negative control: exchanging band pulses between pairs breaks targets."""
    from dataclasses import replace

    spec = GateSpec.create([(1, 3), (2, 4)])
    sol = disjoint_synthesize(spec, fixture7, basis300)
    g0, g1 = sol.gates
    swapped = replace(sol, gates=(replace(g0, coeffs=g1.coeffs),
                                  replace(g1, coeffs=g0.coeffs)))
    chi = coefficient_chi_matrix(swapped, space300)
    for g in sol.gates:
        assert abs(chi[g.pair] - g.achieved) > 0.1


def test_disjoint_needs_more_power_than_common(fixture7, basis300, space300):
    spec = GateSpec.create([(1, 3), (2, 4)])
    common = synthesize(spec, fixture7, basis300, space=space300)
    disjoint = disjoint_synthesize(spec, fixture7, basis300)
    assert np.mean(disjoint.gate_rms()) >= np.mean(common.gate_rms())
