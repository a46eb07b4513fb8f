"""Candidate ranking and exact maximum-weight matching."""

import itertools

import numpy as np
import pytest

from ionpulse.assign import (assign_gates, max_weight_matching, rank_candidates,
                             reduced_kernels, slots_needed)
from ionpulse.chain import ModeSpectrum
from ionpulse.errors import InfeasibleAssignment, TooManyGates

TWO_PI = 2 * np.pi


def brute_force_max(weights):
    rows, cols = weights.shape
    best = -np.inf
    for perm in itertools.permutations(range(cols), rows):
        total = sum(weights[r, c] for r, c in enumerate(perm))
        if total > best:
            best = total
    return best


def test_reduced_kernel_shapes(space300):
    reduced = space300.reduced
    assert len(reduced) == 7
    for r in reduced:
        assert r.shape == (120, 120)
        assert np.max(np.abs(r - r.T)) < 1e-13


def test_reduced_top_eigenvalue_is_max_rayleigh(space300, rng):
    """Largest eigenvalue vs randomized Rayleigh maximization (power iteration)."""
    r = space300.reduced[4]
    top = float(np.max(np.linalg.eigvalsh(r)))
    shift = np.linalg.norm(r, ord=np.inf)
    shifted = r + shift * np.eye(r.shape[0])
    v = rng.normal(size=r.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(400):
        v = shifted @ v
        v /= np.linalg.norm(v)
    rayleigh = float(v @ r @ v)
    assert rayleigh <= top + 1e-9 * abs(top)
    assert rayleigh == pytest.approx(top, rel=1e-9)


def test_slots_needed_arithmetic():
    assert slots_needed(5, 7) == 2   # ceil(10 / 7)
    assert slots_needed(7, 7) == 3   # ceil(21 / 7)
    assert slots_needed(2, 7) == 1


def test_rank_candidates_modulus_order(space300):
    candidates = rank_candidates(space300.reduced, 3)
    assert len(candidates) == 21
    per_mode = {}
    for c in candidates:
        per_mode.setdefault(c.mode, []).append(c)
    for mode, group in per_mode.items():
        values = [abs(c.value) for c in sorted(group, key=lambda c: c.rank)]
        assert values == sorted(values, reverse=True)
        for c in group:
            assert np.linalg.norm(c.vector) == pytest.approx(1.0, abs=1e-12)


def test_matching_diagonal_dominant():
    weights = np.array([[3.0, 1.0, 1.0], [1.0, 3.0, 1.0], [1.0, 1.0, 3.0]])
    cols = max_weight_matching(weights)
    assert cols == [0, 1, 2]
    total = sum(weights[r, c] for r, c in enumerate(cols))
    assert total == brute_force_max(weights) == 9.0


def test_matching_all_ties_lexicographic():
    weights = np.ones((3, 5))
    assert max_weight_matching(weights) == [0, 1, 2]


def test_matching_single_row_argmax():
    weights = np.array([[0.3, 0.9, 0.5, 0.9]])
    assert max_weight_matching(weights) == [1]  # first of the tied maxima


def test_matching_equals_brute_force(rng):
    for _ in range(40):
        rows = int(rng.integers(1, 7))
        cols = int(rng.integers(rows, 8))
        weights = rng.uniform(0.0, 1.0, size=(rows, cols))
        chosen = max_weight_matching(weights)
        total = sum(weights[r, c] for r, c in enumerate(chosen))
        assert total == brute_force_max(weights)


def test_matching_rejects_excess_rows():
    with pytest.raises(TooManyGates):
        max_weight_matching(np.ones((3, 2)))


def test_assignment_solve_order_and_permutation_invariance(fixture7, space300):
    candidates = rank_candidates(space300.reduced, 2)
    pairs = [(1, 3), (2, 4), (1, 5)]
    a1 = assign_gates(pairs, candidates, fixture7)
    a2 = assign_gates(list(reversed(pairs)), candidates, fixture7)
    assert a1 == a2
    ordered = [a1.weights[k] for k in a1.solve_order]
    assert ordered == sorted(ordered)


def test_assignment_zero_weight_row_is_infeasible(space300):
    # an ion decoupled from every mode can never be matched
    eta = np.zeros((4, 7))
    eta[1:, :] = 0.05
    spectrum = ModeSpectrum(mode_frequencies=TWO_PI * np.linspace(2.7, 2.93, 7),
                            lamb_dicke=eta, source="computed")
    candidates = rank_candidates(space300.reduced, 2)
    with pytest.raises(InfeasibleAssignment):
        assign_gates([(0, 1)], candidates, spectrum)
