"""Iterative parallel-gate pulse synthesis in a common null space.

All gates draw their pulses from one null space of the decoupling
constraints.  Gates are solved one at a time, weakest-coupled first;
each new gate is restricted, through a projector, to directions that
produce zero entangling angle against every ion of every previously
solved gate.  The solved eigenvector is then rescaled so the full
mode-summed angle hits the requested target exactly.

Pulse amplitudes are in rad/us.  Ion indices are 0-based here; the I/O
layers translate from the 1-based labels used in chain data tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .assign import (Assignment, assign_gates, rank_candidates, reduced_kernels,
                     slots_needed)
from .basis import BasisSet, NullBasis, build_null_basis
from .chain import ModeSpectrum
from .coupling import PhaseKernels, build_kernels
from .errors import DegenerateSolution, InvalidPair, SignInfeasible, UnsupportedGraph

DEFAULT_TARGET = math.pi / 2
_PROJECTOR_DROP_TOL = 1e-13
_DEGENERATE_TOL = 1e-14


@dataclass(frozen=True)
class GateSpec:
    """Requested gate graph: ion pairs with target angles (rad)."""

    pairs: tuple[tuple[int, int], ...]
    targets: tuple[float, ...]
    qubits: tuple[int, ...]

    @classmethod
    def create(cls, pairs, targets=None, qubits=None) -> "GateSpec":
        norm_pairs = []
        for i, j in pairs:
            if i == j:
                raise InvalidPair(f"gate needs two distinct ions, got ({i}, {j})")
            norm_pairs.append((min(i, j), max(i, j)))
        if len(set(norm_pairs)) != len(norm_pairs):
            raise InvalidPair("duplicate gate pairs in request")
        if targets is None:
            targets = [DEFAULT_TARGET] * len(norm_pairs)
        targets = [float(t) for t in targets]
        if len(targets) != len(norm_pairs):
            raise InvalidPair("one target angle per gate required")
        if any(t == 0 for t in targets):
            raise InvalidPair("target angles must be nonzero")
        if qubits is None:
            qubits = sorted({k for p in norm_pairs for k in p})
        # canonical order: sort pairs, carry targets along
        packed = sorted(zip(norm_pairs, targets))
        return cls(pairs=tuple(p for p, _ in packed),
                   targets=tuple(t for _, t in packed),
                   qubits=tuple(sorted(qubits)))

    def target_of(self, pair: tuple[int, int]) -> float:
        return self.targets[self.pairs.index(pair)]


@dataclass(frozen=True)
class GatePulse:
    """One solved gate: coefficients in the sine basis plus bookkeeping."""

    pair: tuple[int, int]
    target: float
    achieved: float
    sign_flipped: bool
    slot: tuple[int, int]            # (mode, eigen rank)
    weight: float                    # matched |eta eta Lambda|
    coeffs: np.ndarray               # sine-basis amplitudes, rad/us
    reduced: np.ndarray | None       # same pulse in null-space coordinates
    side_scales: dict[int, float] = field(default_factory=dict)

    def scale_on(self, ion: int) -> float:
        return self.side_scales.get(ion, 1.0)

    def rms(self) -> float:
        """RMS amplitude of the unscaled gate pulse (rad/us)."""
        return float(np.linalg.norm(self.coeffs)) / math.sqrt(2.0)


@dataclass(frozen=True)
class PulseSolution:
    """A solved gate set over one chain and basis."""

    basis: BasisSet
    ion_count: int
    gates: tuple[GatePulse, ...]
    assignment: Assignment | None
    notes: tuple[str, ...] = ()

    def ions(self) -> list[int]:
        return sorted({k for g in self.gates for k in g.pair})

    def ion_coeffs(self, ion: int) -> np.ndarray:
        """Composed sine-basis waveform coefficients seen by one ion."""
        out = np.zeros(self.basis.size)
        for g in self.gates:
            if ion in g.pair:
                out += g.scale_on(ion) * g.coeffs
        return out

    def without_gate(self, index: int) -> "PulseSolution":
        gates = tuple(g for k, g in enumerate(self.gates) if k != index)
        return replace(self, gates=gates)

    def gate_rms(self) -> list[float]:
        return [g.rms() for g in self.gates]

    def ion_amplitude_budget(self) -> dict[int, float]:
        """Per-ion sum of incident per-gate RMS amplitudes (rad/us)."""
        budget: dict[int, float] = {}
        for g in self.gates:
            for ion in g.pair:
                budget[ion] = budget.get(ion, 0.0) + abs(g.scale_on(ion)) * g.rms()
        return budget


@dataclass
class DesignSpace:
    """Shared linear-algebra products for one (spectrum, basis) pair."""

    spectrum: ModeSpectrum
    basis: BasisSet
    null: NullBasis
    kernels: PhaseKernels
    reduced: list[np.ndarray]
    _pair_cache: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    @classmethod
    def build(cls, spectrum: ModeSpectrum, basis: BasisSet) -> "DesignSpace":
        null = build_null_basis(basis, spectrum)
        kernels = build_kernels(basis, spectrum)
        return cls(spectrum=spectrum, basis=basis, null=null, kernels=kernels,
                   reduced=reduced_kernels(null, kernels))

    def pair_reduced(self, i: int, j: int) -> np.ndarray:
        """sum_p eta_ip eta_jp R_p, cached per unordered ion pair."""
        key = (min(i, j), max(i, j))
        if key not in self._pair_cache:
            eta = self.spectrum.lamb_dicke
            out = np.zeros_like(self.reduced[0])
            for p, r_p in enumerate(self.reduced):
                out += eta[i, p] * eta[j, p] * r_p
            self._pair_cache[key] = out
        return self._pair_cache[key]


@dataclass(frozen=True)
class SynthesisOptions:
    strict_sign: bool = False
    degenerate_tol: float = _DEGENERATE_TOL


@dataclass(frozen=True)
class Projector:
    """Q = I - W W^T in null-space coordinates, kept in factored form."""

    dimension: int
    columns: np.ndarray | None   # orthonormal removed directions, or None

    @property
    def removed_rank(self) -> int:
        return 0 if self.columns is None else self.columns.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        q = np.eye(self.dimension)
        if self.columns is not None:
            q -= self.columns @ self.columns.T
        return q

    def apply(self, vec: np.ndarray) -> np.ndarray:
        if self.columns is None:
            return vec.copy()
        return vec - self.columns @ (self.columns.T @ vec)

    def project_kernel(self, kernel: np.ndarray) -> np.ndarray:
        """Q^T kernel Q via rank updates (kernel symmetric)."""
        if self.columns is None:
            return kernel.copy()
        w = self.columns
        kw = kernel @ w
        wkw = w.T @ kw
        out = kernel - kw @ w.T - w @ kw.T + w @ wkw @ w.T
        return 0.5 * (out + out.T)


def crosstalk_projector(previous: list[GatePulse], pair: tuple[int, int],
                        space: DesignSpace) -> tuple[Projector, list[str]]:
    """Projector (in null-space coordinates) removing crosstalk directions.

    For each previously solved gate over (k, l) and each ion combination
    kappa in the new pair, kappa' in (k, l) with kappa != kappa', the
    direction pair_reduced(kappa, kappa') @ r_prev is projected out.
    Directions that Gram-Schmidt reduces below 1e-13 of their original
    size are skipped and reported.
    """
    dim = space.null.dimension
    columns: list[np.ndarray] = []
    notes: list[str] = []
    i, j = pair
    for prev in previous:
        if prev.reduced is None:
            raise ValueError("previous gate lacks null-space coordinates")
        k, l = prev.pair
        for kappa in (i, j):
            for kappa2 in (k, l):
                if kappa == kappa2:
                    continue
                w = space.pair_reduced(kappa, kappa2) @ prev.reduced
                scale = float(np.linalg.norm(w))
                if scale == 0.0:
                    notes.append(f"crosstalk direction ({kappa},{kappa2}) of gate "
                                 f"{prev.pair} is identically zero; skipped")
                    continue
                for col in columns:
                    w = w - col * (col @ w)
                for col in columns:
                    w = w - col * (col @ w)
                norm = float(np.linalg.norm(w))
                if norm < _PROJECTOR_DROP_TOL * scale:
                    notes.append(f"crosstalk direction ({kappa},{kappa2}) of gate "
                                 f"{prev.pair} degenerate after orthogonalization; skipped")
                    continue
                columns.append(w / norm)
    w_mat = np.column_stack(columns) if columns else None
    return Projector(dimension=dim, columns=w_mat), notes


def _sign_fixed(vec: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(vec)))
    return -vec if vec[i] < 0 else vec


def _columns_from_matrix(q: np.ndarray) -> np.ndarray | None:
    """Recover orthonormal removed directions from a dense projector."""
    vals, vecs = np.linalg.eigh(np.eye(q.shape[0]) - q)
    cols = vecs[:, vals > 0.5]
    return cols if cols.size else None


def solve_gate(pair: tuple[int, int], slot: tuple[int, int], projector: Projector | np.ndarray,
               space: DesignSpace, target: float,
               options: SynthesisOptions = SynthesisOptions()) -> tuple[np.ndarray, np.ndarray, float, bool]:
    """Solve one gate on its assigned slot inside the projected space.

    Returns (coeffs, reduced, achieved_angle, sign_flipped).  The pulse
    is the slot's largest-modulus eigenvector of the projected reduced
    kernel, rescaled so |achieved| equals |target| exactly in
    coefficient space.
    """
    if isinstance(projector, np.ndarray):
        projector = Projector(dimension=projector.shape[0],
                              columns=_columns_from_matrix(projector))
    mode, lam = slot
    r_star = projector.project_kernel(space.reduced[mode])
    vals, vecs = np.linalg.eigh(r_star)
    order = np.argsort(-np.abs(vals), kind="stable")
    i, j = pair
    pair_kernel = space.pair_reduced(i, j)
    kernel_scale = float(np.max(np.abs(pair_kernel)))
    floor = options.degenerate_tol * max(kernel_scale, 1e-300)

    def realize(rank: int) -> tuple[np.ndarray, float]:
        vec = _sign_fixed(vecs[:, order[rank - 1]])
        red = projector.apply(vec)
        return red, float(red @ pair_kernel @ red)

    reduced, qform = realize(lam)
    if abs(qform / target) < floor:
        raise DegenerateSolution(
            f"gate {pair} couples negligibly on mode {mode} (rank {lam})")
    if (qform < 0) != (target < 0):
        # Rescaling cannot flip the angle sign; the nearest lower-ranked
        # eigenvector realizing the required sign is an equally valid,
        # slightly less power-efficient choice.
        if options.strict_sign:
            raise SignInfeasible(f"gate {pair} can only reach angle of opposite sign")
        for rank in range(lam + 1, len(order) + 1):
            red2, qform2 = realize(rank)
            if (qform2 < 0) == (target < 0) and abs(qform2 / target) >= floor:
                reduced, qform = red2, qform2
                break
    norm_factor = qform / target
    if abs(norm_factor) < floor:
        raise DegenerateSolution(
            f"gate {pair} couples negligibly on mode {mode} (rank {lam})")
    flipped = norm_factor < 0
    reduced = reduced / math.sqrt(abs(norm_factor))
    coeffs = space.null.matrix @ reduced
    achieved = target if not flipped else -target
    return coeffs, reduced, achieved, flipped


def synthesize(spec: GateSpec, spectrum: ModeSpectrum, basis: BasisSet,
               options: SynthesisOptions = SynthesisOptions(),
               space: DesignSpace | None = None) -> PulseSolution:
    """Solve every requested gate; see module docstring for the strategy."""
    if not spec.pairs:
        return PulseSolution(basis=basis, ion_count=spectrum.ion_count, gates=(),
                             assignment=None, notes=())
    if space is None:
        space = DesignSpace.build(spectrum, basis)
    nu = slots_needed(len(spec.qubits), spectrum.mode_count)
    candidates = rank_candidates(space.reduced, nu)
    signs = {p: t for p, t in zip(spec.pairs, spec.targets)}
    assignment = assign_gates(list(spec.pairs), candidates, spectrum,
                              target_signs=signs)

    solved: dict[int, GatePulse] = {}
    notes: list[str] = []
    for step, idx in enumerate(assignment.solve_order):
        pair = assignment.pairs[idx]
        slot = assignment.slots[idx]
        previous = [solved[k] for k in assignment.solve_order[:step]]
        projector, proj_notes = crosstalk_projector(previous, pair, space)
        notes.extend(proj_notes)
        try:
            coeffs, reduced, achieved, flipped = solve_gate(
                pair, slot, projector, space, spec.target_of(pair), options)
        except (DegenerateSolution, SignInfeasible) as exc:
            exc.args = (f"iteration {step + 1} (gate {pair}): {exc.args[0]}",)
            raise
        solved[idx] = GatePulse(
            pair=pair, target=spec.target_of(pair), achieved=achieved,
            sign_flipped=flipped, slot=slot, weight=assignment.weights[idx],
            coeffs=coeffs, reduced=reduced,
            side_scales={pair[0]: 1.0, pair[1]: 1.0})
        if flipped:
            notes.append(f"gate {pair} solved with flipped angle sign")

    gates = tuple(solved[idx] for idx in assignment.solve_order)
    return PulseSolution(basis=basis, ion_count=spectrum.ion_count, gates=gates,
                         assignment=assignment, notes=tuple(notes))


def coefficient_chi_matrix(solution: PulseSolution, space: DesignSpace) -> np.ndarray:
    """Entangling-angle matrix over all ions, from coefficients alone."""
    from .coupling import entangling_angle

    n = solution.ion_count
    chi = np.zeros((n, n))
    ions = solution.ions()
    in_null = all(g.reduced is not None for g in solution.gates)
    composed: dict[int, np.ndarray] = {}
    for ion in ions:
        if in_null:
            vec = np.zeros(space.null.dimension)
            for g in solution.gates:
                if ion in g.pair:
                    vec += g.scale_on(ion) * g.reduced
        else:
            vec = solution.ion_coeffs(ion)
        composed[ion] = vec
    for a_pos, a in enumerate(ions):
        for b in ions[a_pos + 1:]:
            if in_null:
                val = float(composed[a] @ space.pair_reduced(a, b) @ composed[b])
            else:
                val = entangling_angle(composed[a], composed[b], a, b,
                                       space.kernels, space.spectrum)
            chi[a, b] = chi[b, a] = val
    return chi


def rebalance_power(solution: PulseSolution, pass_through: bool = False) -> PulseSolution:
    """Even out per-ion power on star-shaped overlap patterns.

    In every connected component with exactly one ion of degree d > 1
    (the center), each incident gate is rescaled by 1/sqrt(d) on the
    center side and sqrt(d) on the far side.  Angles are untouched
    because each gate's two side scales multiply to one.  Components
    with two adjacent ions of degree > 1 are not star-shaped; they raise
    UnsupportedGraph unless pass_through is set.
    """
    degree: dict[int, int] = {}
    for g in solution.gates:
        for ion in g.pair:
            degree[ion] = degree.get(ion, 0) + 1

    parent = {ion: ion for ion in degree}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for g in solution.gates:
        a, b = (find(k) for k in g.pair)
        if a != b:
            parent[a] = b

    components: dict[int, list[int]] = {}
    for ion in degree:
        components.setdefault(find(ion), []).append(ion)

    center_of: dict[int, int | None] = {}
    stretches = []
    for root, members in components.items():
        hubs = [ion for ion in members if degree[ion] > 1]
        if len(hubs) > 1:
            if pass_through:
                center_of[root] = None
                continue
            raise UnsupportedGraph(
                f"component {sorted(members)} has multiple overlap centers "
                f"{sorted(hubs)}; rebalancing is defined for stars only")
        center_of[root] = hubs[0] if hubs else None
        if hubs:
            stretches.append(math.sqrt(degree[hubs[0]]))

    new_gates = []
    for g in solution.gates:
        center = center_of[find(g.pair[0])]
        if center is None or center not in g.pair:
            new_gates.append(g)
            continue
        d = degree[center]
        far = g.pair[0] if g.pair[1] == center else g.pair[1]
        scales = dict(g.side_scales)
        scales[center] = g.scale_on(center) / math.sqrt(d)
        scales[far] = g.scale_on(far) * math.sqrt(d)
        new_gates.append(replace(g, side_scales=scales))

    notes = solution.notes
    if stretches:
        notes = notes + (
            f"rebalanced; fixed-power execution-time stretch {max(stretches):.6f}",)
    return replace(solution, gates=tuple(new_gates), notes=notes)
