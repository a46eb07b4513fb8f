"""Iterative synthesis: projectors, exactness, rebalancing."""

import numpy as np
import pytest

from ionpulse.errors import InvalidPair, UnsupportedGraph
from ionpulse.solver import (GateSpec, Projector, SynthesisOptions,
                             coefficient_chi_matrix, crosstalk_projector,
                             rebalance_power, solve_gate, synthesize)

PI2 = np.pi / 2


@pytest.fixture(scope="module")
def two_gate_solution(fixture7, basis300, space300):
    spec = GateSpec.create([(1, 3), (2, 4)])
    return synthesize(spec, fixture7, basis300, space=space300)


@pytest.fixture(scope="module")
def ten_gate_solution(fixture7, basis300, space300):
    pairs = [(a, b) for a in range(1, 6) for b in range(a + 1, 6)]
    return synthesize(GateSpec.create(pairs), fixture7, basis300, space=space300)


def test_gate_spec_validation():
    with pytest.raises(InvalidPair):
        GateSpec.create([(2, 2)])
    with pytest.raises(InvalidPair):
        GateSpec.create([(1, 2), (2, 1)])
    with pytest.raises(InvalidPair):
        GateSpec.create([(1, 2)], targets=[0.0])
    spec = GateSpec.create([(4, 2), (1, 3)])
    assert spec.pairs == ((1, 3), (2, 4))


def test_projector_no_previous_is_identity(space300):
    q, notes = crosstalk_projector([], (1, 3), space300)
    assert notes == []
    assert q.removed_rank == 0
    assert np.array_equal(q.matrix, np.eye(space300.null.dimension))


def test_projector_ranks(fixture7, basis300, space300):
    sol = synthesize(GateSpec.create([(0, 1)]), fixture7, basis300, space=space300)
    first = sol.gates[0]
    q, notes = crosstalk_projector([first], (4, 5), space300)
    assert notes == []
    assert q.removed_rank == 4  # disjoint pairs: all four ion combinations
    q2, _ = crosstalk_projector([first], (1, 5), space300)
    assert q2.removed_rank <= 3  # shared ion skips one combination
    qm = q.matrix
    assert np.max(np.abs(qm - qm.T)) < 1e-12
    assert np.max(np.abs(qm @ qm - qm)) < 1e-12


def test_projector_skips_symmetry_degenerate_directions(two_gate_solution, space300):
    # the center ion couples only to even modes, so its crosstalk
    # directions toward a mirror pair coincide and one is skipped
    first = two_gate_solution.gates[0]
    other = (1, 3) if first.pair != (1, 3) else (2, 4)
    q, notes = crosstalk_projector([first], other, space300)
    assert q.removed_rank == 3
    assert any("degenerate" in n for n in notes)


def test_projector_invariant_to_previous_scale(two_gate_solution, space300):
    """Rescaling an already-solved gate does not move the removed space."""
    from dataclasses import replace

    first = two_gate_solution.gates[0]
    scaled = replace(first, reduced=3.7 * first.reduced,
                     coeffs=3.7 * first.coeffs)
    pair = (1, 3) if first.pair != (1, 3) else (2, 4)
    q1, _ = crosstalk_projector([first], pair, space300)
    q2, _ = crosstalk_projector([scaled], pair, space300)
    assert np.max(np.abs(q1.matrix - q2.matrix)) < 1e-11


def test_solve_gate_target_scaling(fixture7, space300):
    identity = Projector(dimension=space300.null.dimension, columns=None)
    slot = (6, 1)
    v1, _, a1, _ = solve_gate((1, 3), slot, identity, space300, PI2)
    v2, _, a2, _ = solve_gate((1, 3), slot, identity, space300, 2 * PI2)
    assert a2 == pytest.approx(2 * a1)
    assert np.allclose(v2, np.sqrt(2.0) * v1, atol=1e-12)


def test_single_gate_equals_unprojected_candidate(fixture7, basis300, space300):
    """With nothing solved before, the pulse is the bare slot eigenvector."""
    sol = synthesize(GateSpec.create([(2, 4)]), fixture7, basis300, space=space300)
    gate = sol.gates[0]
    identity = Projector(dimension=space300.null.dimension, columns=None)
    coeffs, _, achieved, _ = solve_gate(gate.pair, gate.slot, identity, space300,
                                        gate.target)
    assert achieved == gate.achieved
    assert np.allclose(coeffs, gate.coeffs, atol=1e-12)


def test_two_disjoint_gates_cross_angles_vanish(two_gate_solution, space300):
    chi = coefficient_chi_matrix(two_gate_solution, space300)
    targeted = {g.pair for g in two_gate_solution.gates}
    for g in two_gate_solution.gates:
        assert chi[g.pair] == pytest.approx(g.achieved, abs=1e-12)
    ions = two_gate_solution.ions()
    for a in ions:
        for b in ions:
            if a < b and (a, b) not in targeted:
                assert abs(chi[a, b]) < 1e-9


def test_empty_spec_gives_empty_solution(fixture7, basis300):
    spec = GateSpec(pairs=(), targets=(), qubits=())
    sol = synthesize(spec, fixture7, basis300)
    assert sol.gates == ()
    assert sol.ions() == []


def test_full_set_exactness_and_order(ten_gate_solution, space300):
    sol = ten_gate_solution
    assert len(sol.gates) == 10
    chi = coefficient_chi_matrix(sol, space300)
    for g in sol.gates:
        assert chi[g.pair] == pytest.approx(g.achieved, abs=1e-10)
    weights = [g.weight for g in sol.gates]
    assert weights == sorted(weights)


def test_subset_deletion_coefficient_space(ten_gate_solution, space300):
    sol = ten_gate_solution
    full = coefficient_chi_matrix(sol, space300)
    for k in range(len(sol.gates)):
        dropped = sol.without_gate(k)
        part = coefficient_chi_matrix(dropped, space300)
        pair = sol.gates[k].pair
        mask = np.ones_like(full, dtype=bool)
        mask[pair] = mask[pair[::-1]] = False
        assert np.max(np.abs((full - part)[mask])) < 1e-10


def test_independent_scaling_coefficient_space(ten_gate_solution, space300):
    from dataclasses import replace

    sol = ten_gate_solution
    base = coefficient_chi_matrix(sol, space300)
    for c in (0.5, 2.0):
        gates = list(sol.gates)
        gates[4] = replace(gates[4], coeffs=c * gates[4].coeffs,
                           reduced=c * gates[4].reduced)
        scaled = replace(sol, gates=tuple(gates))
        chi = coefficient_chi_matrix(scaled, space300)
        pair = sol.gates[4].pair
        assert chi[pair] == pytest.approx(c**2 * base[pair], rel=1e-12)
        mask = np.ones_like(base, dtype=bool)
        mask[pair] = mask[pair[::-1]] = False
        assert np.max(np.abs((chi - base)[mask])) < 1e-10


def test_power_trend_across_solve_order(fixture7, basis300, space300):
    pairs = [(a, b) for a in range(7) for b in range(a + 1, 7)]
    sol = synthesize(GateSpec.create(pairs), fixture7, basis300, space=space300)
    rms = sol.gate_rms()
    first, last = rms[:len(rms) // 2], rms[(len(rms) + 1) // 2:]
    assert np.median(last) >= np.median(first)


def test_rebalance_single_edges_identity(two_gate_solution, space300):
    balanced = rebalance_power(two_gate_solution)
    for before, after in zip(two_gate_solution.gates, balanced.gates):
        assert before.side_scales == after.side_scales


def test_rebalance_star(fixture7, basis300, space300):
    spec = GateSpec.create([(3, 1), (3, 2), (3, 4)])
    sol = synthesize(spec, fixture7, basis300, space=space300)
    balanced = rebalance_power(sol)
    d = np.sqrt(3.0)
    for gate in balanced.gates:
        assert gate.scale_on(3) == pytest.approx(1 / d)
        far = gate.pair[0] if gate.pair[1] == 3 else gate.pair[1]
        assert gate.scale_on(far) == pytest.approx(d)
    before = coefficient_chi_matrix(sol, space300)
    after = coefficient_chi_matrix(balanced, space300)
    assert np.max(np.abs(before - after)) < 1e-12
    budget_before = sol.ion_amplitude_budget()
    budget_after = balanced.ion_amplitude_budget()
    assert budget_after[3] == pytest.approx(budget_before[3] / d)
    for ion in (1, 2, 4):
        assert budget_after[ion] == pytest.approx(budget_before[ion] * d)


def test_rebalance_rejects_non_star(fixture7, basis300, space300):
    spec = GateSpec.create([(1, 2), (2, 3), (3, 4)])
    sol = synthesize(spec, fixture7, basis300, space=space300)
    with pytest.raises(UnsupportedGraph):
        rebalance_power(sol)
    passed = rebalance_power(sol, pass_through=True)
    assert all(g.side_scales == s.side_scales
               for g, s in zip(sol.gates, passed.gates))


def test_strict_sign_mode(fixture7, basis300, space300):
    # tolerant default may flip; strict mode must either match sign or raise
    from ionpulse.errors import SignInfeasible

    spec = GateSpec.create([(1, 3), (2, 4)])
    try:
        sol = synthesize(spec, fixture7, basis300,
                         options=SynthesisOptions(strict_sign=True), space=space300)
        assert all(not g.sign_flipped for g in sol.gates)
    except SignInfeasible:
        pass
