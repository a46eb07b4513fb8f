"""Gate-to-mode assignment by exact maximum-weight matching.

Each gate needs a dominant (mode, eigen-rank) slot of the reduced phase
kernels.  The weight of pairing gate (i, j) with slot (p, lam) is
|eta_ip eta_jp Lambda_(p,lam)|, a proxy for how little pulse power the
pair needs on that mode.  Matching is exact (rectangular assignment),
with deterministic lexicographic tie-breaking, and the solve order runs
from the weakest matched weight to the strongest so that power-hungry
gates face the fewest crosstalk constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .basis import NullBasis
from .chain import ModeSpectrum
from .coupling import PhaseKernels
from .errors import InfeasibleAssignment, NumericalFailure, TooManyGates


@dataclass(frozen=True)
class ModeCandidate:
    """Eigen-slot of one reduced kernel, ranked by |eigenvalue|."""

    mode: int
    rank: int            # 1-based rank within the mode, by descending modulus
    value: float         # eigenvalue
    vector: np.ndarray   # unit eigenvector in null-basis coordinates


@dataclass(frozen=True)
class Assignment:
    """Matched (gate pair -> candidate slot) plus the solve order."""

    pairs: tuple[tuple[int, int], ...]
    slots: tuple[tuple[int, int], ...]      # (mode, rank) per pair
    weights: tuple[float, ...]              # matched |eta eta Lambda|
    solve_order: tuple[int, ...]            # indices into pairs, weakest first

    def slot_of(self, pair: tuple[int, int]) -> tuple[int, int]:
        return self.slots[self.pairs.index(pair)]


def reduced_kernels(null: NullBasis, kernels: PhaseKernels) -> list[np.ndarray]:
    """Congruence-transform every kernel into the null-space coordinates."""
    a = null.matrix
    out = []
    for s_p in kernels.per_mode:
        r = a.T @ (s_p @ a)
        out.append(0.5 * (r + r.T))
    return out


def _deterministic_sign(vec: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(vec)))
    return vec if vec[i] > 0 or (vec[i] == 0) else -vec


def rank_candidates(reduced: list[np.ndarray], slots_per_mode: int) -> list[ModeCandidate]:
    """Top slots_per_mode largest-modulus eigenpairs of every reduced kernel."""
    if slots_per_mode < 1:
        raise ValueError("need at least one slot per mode")
    candidates = []
    for p, r_p in enumerate(reduced):
        try:
            vals, vecs = np.linalg.eigh(r_p)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"eigendecomposition failed for mode {p}") from exc
        order = np.argsort(-np.abs(vals), kind="stable")[:slots_per_mode]
        for rank, idx in enumerate(order, start=1):
            candidates.append(ModeCandidate(
                mode=p, rank=rank, value=float(vals[idx]),
                vector=_deterministic_sign(vecs[:, idx]).copy()))
    return candidates


def slots_needed(qubit_count: int, mode_count: int) -> int:
    """Eigen-ranks per mode needed to host every pair of the qubit set."""
    pair_count = qubit_count * (qubit_count - 1) // 2
    return max(1, math.ceil(pair_count / mode_count))


def _lexicographic_refine(weights: np.ndarray, best_total: float) -> list[int]:
    """Smallest matching (row-by-row column order) achieving best_total.

    Candidate acceptance compares float totals summed in a fixed order,
    so exact ties (equal multisets of weights) resolve cleanly.
    """
    rows, cols = weights.shape
    chosen: list[int] = []
    used = np.zeros(cols, dtype=bool)
    remaining_target = best_total
    for r in range(rows):
        sub_rows = np.arange(r + 1, rows)
        accepted = None
        fallback = (math.inf, -1)
        for c in range(cols):
            if used[c]:
                continue
            free_cols = np.flatnonzero(~used)
            free_cols = free_cols[free_cols != c]
            if sub_rows.size:
                sub = weights[np.ix_(sub_rows, free_cols)]
                ri, ci = linear_sum_assignment(-sub)
                rest = float(np.sum(sub[ri, ci]))
            else:
                rest = 0.0
            total = weights[r, c] + rest
            deficit = abs(total - remaining_target)
            if deficit == 0.0:
                accepted = c
                break
            if deficit < fallback[0]:
                fallback = (deficit, c)
        if accepted is None:
            scale = max(abs(remaining_target), 1.0)
            if fallback[0] > 1e-9 * scale:
                raise NumericalFailure("matching refinement lost the optimum")
            accepted = fallback[1]
        chosen.append(accepted)
        used[accepted] = True
        remaining_target -= weights[r, accepted]
    return chosen


def max_weight_matching(weights: np.ndarray) -> list[int]:
    """Column index per row of the max-weight matching, ties lexicographic.

    Requires rows <= cols; weights must be non-negative.
    """
    weights = np.asarray(weights, dtype=float)
    rows, cols = weights.shape
    if rows > cols:
        raise TooManyGates(f"{rows} gates but only {cols} mode/eigenvalue slots")
    ri, ci = linear_sum_assignment(-weights)
    best_total = float(np.sum(weights[ri, ci]))
    return _lexicographic_refine(weights, best_total)


def assign_gates(pairs: list[tuple[int, int]], candidates: list[ModeCandidate],
                 spectrum: ModeSpectrum,
                 target_signs: dict[tuple[int, int], float] | None = None) -> Assignment:
    """Match gates to candidate slots and fix the solve order.

    When target_signs is given, slots whose eigenvalue sign cannot
    produce the requested angle sign are deprioritized: the matching
    first maximizes the number of sign-correct assignments, then the
    total weight.  Pulse rescaling cannot flip an angle's sign, so this
    is the only place sign feasibility can be steered.
    """
    pairs = sorted(tuple(sorted(p)) for p in pairs)
    slots = sorted(candidates, key=lambda c: (c.mode, c.rank))
    if len(pairs) > len(slots):
        raise TooManyGates(f"{len(pairs)} gates exceed {len(slots)} candidate slots")
    eta = spectrum.lamb_dicke
    weights = np.empty((len(pairs), len(slots)))
    signed = np.empty_like(weights)
    for r, (i, j) in enumerate(pairs):
        for c, cand in enumerate(slots):
            signed[r, c] = eta[i, cand.mode] * eta[j, cand.mode] * cand.value
            weights[r, c] = abs(signed[r, c])
    matching_weights = weights
    if target_signs is not None:
        wanted = np.array([np.sign(target_signs.get(p, 1.0)) for p in pairs])
        bonus = 1.0 + float(np.sum(weights))
        matching_weights = weights + bonus * (np.sign(signed) == wanted[:, None])
    cols = max_weight_matching(matching_weights)
    matched_w = [float(weights[r, c]) for r, c in enumerate(cols)]
    if any(w == 0.0 for w in matched_w):
        bad = pairs[matched_w.index(0.0)]
        raise InfeasibleAssignment(f"pair {bad} matched with zero coupling weight")
    slot_keys = [(slots[c].mode, slots[c].rank) for c in cols]
    order = sorted(range(len(pairs)),
                   key=lambda r: (matched_w[r], pairs[r], slot_keys[r]))
    return Assignment(pairs=tuple(pairs), slots=tuple(slot_keys),
                      weights=tuple(matched_w), solve_order=tuple(order))
