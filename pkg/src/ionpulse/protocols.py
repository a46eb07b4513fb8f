"""Alternative parallelization protocols: sign sequencing and disjoint bands.

Sequencing runs independently solved per-pair pulses in time slots with
a recursive +/-1 sign pattern; distinct rows of the pattern are
orthogonal, so unwanted pair angles cancel across slots while each
target pair accumulates its full angle.

The disjoint protocol gives every gate its own frequency band and a
per-band decoupling null space; two pulses from different bands then
produce exactly zero mutual angle on every mode, so no crosstalk
projector is ever needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .assign import Assignment, assign_gates, rank_candidates, reduced_kernels, slots_needed
from .basis import BasisSet, null_space, build_constraint_matrix
from .chain import ModeSpectrum
from .coupling import build_kernels
from .errors import (DegenerateSolution, InsufficientDOF, InvalidCount,
                     InvalidSchedule, SignInfeasible)
from .solver import (DesignSpace, GatePulse, GateSpec, PulseSolution,
                     SynthesisOptions, synthesize)


def walsh_signs(count: int) -> np.ndarray:
    """Recursive sign pattern of shape (count, count), count a power of two."""
    if count < 1 or count & (count - 1):
        raise InvalidCount(f"slot count must be a power of two, got {count}")
    g = np.array([[1]], dtype=int)
    while g.shape[0] < count:
        g = np.block([[g, g], [g, -g]])
    return g


@dataclass(frozen=True)
class SequencedSchedule:
    """Per-pair base pulses plus the signed slot schedule."""

    base: PulseSolution          # independent single-pair solutions, full target
    signs: np.ndarray            # (pairs, slots) of +/-1
    slot_scale: float            # amplitude scale applied in every slot

    @property
    def slot_count(self) -> int:
        return self.signs.shape[1]

    @property
    def total_duration(self) -> float:
        return self.slot_count * self.base.basis.tau

    def slot_solution(self, slot: int) -> PulseSolution:
        """The pulse set driven during one slot, signs and scale applied."""
        gates = []
        for row, gate in enumerate(self.base.gates):
            factor = float(self.signs[row, slot]) * self.slot_scale
            scales = {ion: factor * gate.scale_on(ion) for ion in gate.pair}
            gates.append(replace(gate, side_scales=scales))
        return replace(self.base, gates=tuple(gates))


def sequencing_schedule(per_pair: list[GatePulse] | PulseSolution,
                        signs: np.ndarray) -> SequencedSchedule:
    """Attach a sign schedule to independently solved per-pair pulses."""
    base = per_pair if isinstance(per_pair, PulseSolution) else None
    if base is None:
        raise InvalidSchedule("sequencing needs a PulseSolution of per-pair gates")
    signs = np.asarray(signs)
    if signs.shape[0] != len(base.gates) or signs.shape[0] != signs.shape[1]:
        raise InvalidSchedule(
            f"sign pattern {signs.shape} does not match {len(base.gates)} pulses")
    count = signs.shape[0]
    return SequencedSchedule(base=base, signs=signs,
                             slot_scale=1.0 / math.sqrt(count))


def sequencing_protocol(spec: GateSpec, spectrum: ModeSpectrum, basis: BasisSet,
                        options: SynthesisOptions = SynthesisOptions(),
                        space: DesignSpace | None = None) -> SequencedSchedule:
    """Solve every pair on its own, then schedule with recursive signs.

    Per-slot pulses are scaled by 1/sqrt(count), so each of the count
    slots contributes target/count and the full target accumulates.
    """
    count = len(spec.pairs)
    signs = walsh_signs(count)
    if space is None:
        space = DesignSpace.build(spectrum, basis)
    gates = []
    for pair, target in zip(spec.pairs, spec.targets):
        single = GateSpec.create([pair], targets=[target], qubits=spec.qubits)
        sol = synthesize(single, spectrum, basis, options=options, space=space)
        gates.append(sol.gates[0])
    base = PulseSolution(basis=basis, ion_count=spectrum.ion_count,
                         gates=tuple(gates), assignment=None,
                         notes=("per-pair series pulses for sequencing",))
    return sequencing_schedule(base, signs)


@dataclass(frozen=True)
class FrequencyPartition:
    """Disjoint contiguous index bands, one per gate, centered on modes."""

    pairs: tuple[tuple[int, int], ...]
    modes: tuple[int, ...]
    bands: tuple[tuple[int, int], ...]    # inclusive (lo, hi) harmonic numbers

    def band_indices(self, k: int, basis: BasisSet) -> np.ndarray:
        lo, hi = self.bands[k]
        return np.flatnonzero((basis.indices >= lo) & (basis.indices <= hi))


def partition_frequencies(basis: BasisSet, assignment: Assignment,
                          spectrum: ModeSpectrum) -> FrequencyPartition:
    """Carve one contiguous band per gate around its assigned mode.

    Bands are symmetric around the harmonic nearest the assigned mode
    wherever neighboring bands allow, and never smaller than 2 P + 1
    indices, the generic minimum for a nonempty per-band null space.
    """
    lo_all = int(basis.indices[0])
    hi_all = int(basis.indices[-1])
    count = len(assignment.pairs)
    min_size = 2 * spectrum.mode_count + 1
    if count == 1:
        return FrequencyPartition(pairs=assignment.pairs,
                                  modes=(assignment.slots[0][0],),
                                  bands=((lo_all, hi_all),))
    if (hi_all - lo_all + 1) < count * min_size:
        raise InsufficientDOF(
            f"{hi_all - lo_all + 1} harmonics cannot host {count} bands of {min_size}")

    freqs_mhz = spectrum.frequencies_mhz
    order = sorted(range(count),
                   key=lambda k: freqs_mhz[assignment.slots[k][0]])
    centers = [int(np.clip(round(freqs_mhz[assignment.slots[k][0]] * basis.tau),
                           lo_all, hi_all)) for k in order]

    # Tentative boundaries at midpoints, then push until every band can
    # host the minimum size.
    bounds = [lo_all - 1]
    for a, b in zip(centers[:-1], centers[1:]):
        bounds.append((a + b) // 2)
    bounds.append(hi_all)
    for _ in range(4 * count):
        sizes = [bounds[k + 1] - bounds[k] for k in range(count)]
        bad = [k for k, s in enumerate(sizes) if s < min_size]
        if not bad:
            break
        k = bad[0]
        left_surplus = sizes[k - 1] - min_size if k > 0 else -1
        right_surplus = sizes[k + 1] - min_size if k + 1 < count else -1
        need = min_size - sizes[k]
        if left_surplus >= right_surplus and left_surplus > 0:
            bounds[k] -= min(need, left_surplus)
        elif right_surplus > 0:
            bounds[k + 1] += min(need, right_surplus)
        else:
            raise InsufficientDOF("cannot allocate minimum band sizes")

    bands_sorted = []
    for k in range(count):
        lo_k, hi_k = bounds[k] + 1, bounds[k + 1]
        c = min(max(centers[k], lo_k), hi_k)
        w = min(c - lo_k, hi_k - c)
        if 2 * w + 1 >= min_size:
            bands_sorted.append((c - w, c + w))
        else:
            # Minimum-size band placed as close to centered as the slice allows.
            lo_band = int(np.clip(c - (min_size - 1) // 2, lo_k, hi_k - min_size + 1))
            bands_sorted.append((lo_band, lo_band + min_size - 1))

    bands = [None] * count
    for pos, k in enumerate(order):
        bands[k] = bands_sorted[pos]
    return FrequencyPartition(pairs=assignment.pairs,
                              modes=tuple(s[0] for s in assignment.slots),
                              bands=tuple(bands))


def _band_solve(pair, target, mode, cols, basis, spectrum, kernels, options):
    """Power-optimal decoupled pulse inside one frequency band."""
    sub_matrix = build_constraint_matrix(basis, spectrum)[:, cols]
    try:
        null = null_space(sub_matrix)
    except InsufficientDOF as exc:
        raise InsufficientDOF(
            f"band {basis.indices[cols[0]]}..{basis.indices[cols[-1]]} "
            f"for gate {pair}: {exc}") from exc
    sub_kernels = [s_p[np.ix_(cols, cols)] for s_p in kernels.per_mode]
    reduced = [null.matrix.T @ k @ null.matrix for k in sub_kernels]
    eta = spectrum.lamb_dicke
    i, j = pair
    pair_kernel = sum(eta[i, p] * eta[j, p] * r for p, r in enumerate(reduced))
    vals, vecs = np.linalg.eigh(0.5 * (reduced[mode] + reduced[mode].T))
    ranks = np.argsort(-np.abs(vals), kind="stable")
    chosen = None
    for idx in ranks:
        vec = vecs[:, idx]
        qform = float(vec @ pair_kernel @ vec)
        if qform == 0.0:
            continue
        if (qform < 0) == (target < 0):
            chosen = (vec, qform)
            break
        if chosen is None:
            chosen = (vec, qform)
    if chosen is None:
        raise DegenerateSolution(f"gate {pair}: band couples negligibly")
    vec, qform = chosen
    if (qform < 0) != (target < 0) and options.strict_sign:
        raise SignInfeasible(f"gate {pair} reaches only the opposite angle sign")
    norm_factor = qform / target
    sub_coeffs = (null.matrix @ vec) / math.sqrt(abs(norm_factor))
    coeffs = np.zeros(basis.size)
    coeffs[cols] = sub_coeffs
    achieved = target if norm_factor > 0 else -target
    return coeffs, achieved, norm_factor < 0


def disjoint_synthesize(spec: GateSpec, spectrum: ModeSpectrum, basis: BasisSet,
                        partition: FrequencyPartition | None = None,
                        options: SynthesisOptions = SynthesisOptions()) -> PulseSolution:
    """One gate per frequency band; zero crosstalk by construction."""
    if not spec.pairs:
        return PulseSolution(basis=basis, ion_count=spectrum.ion_count, gates=(),
                             assignment=None, notes=())
    kernels = build_kernels(basis, spectrum)
    null = null_space(build_constraint_matrix(basis, spectrum))
    reduced = reduced_kernels(null, kernels)
    nu = slots_needed(len(spec.qubits), spectrum.mode_count)
    candidates = rank_candidates(reduced, nu)
    signs = {p: t for p, t in zip(spec.pairs, spec.targets)}
    assignment = assign_gates(list(spec.pairs), candidates, spectrum,
                              target_signs=signs)
    if partition is None:
        partition = partition_frequencies(basis, assignment, spectrum)

    gates = []
    notes = []
    for k, pair in enumerate(assignment.pairs):
        cols = partition.band_indices(k, basis)
        target = spec.target_of(pair)
        coeffs, achieved, flipped = _band_solve(
            pair, target, partition.modes[k], cols, basis, spectrum, kernels, options)
        if flipped:
            notes.append(f"gate {pair} solved with flipped angle sign")
        gates.append(GatePulse(
            pair=pair, target=target, achieved=achieved, sign_flipped=flipped,
            slot=(partition.modes[k], 1), weight=assignment.weights[k],
            coeffs=coeffs, reduced=None,
            side_scales={pair[0]: 1.0, pair[1]: 1.0}))
    return PulseSolution(basis=basis, ion_count=spectrum.ion_count,
                         gates=tuple(gates), assignment=assignment,
                         notes=tuple(notes))
