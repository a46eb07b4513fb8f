"""Amplitude-knob calibration analysis for gate graphs.

Per-qubit calibration asks for knobs Omega_i > 0 with
Omega_i * Omega_j = theta_ij on every edge of the gate graph, where
theta_ij is the measured ratio between desired and obtained angle.  In
log space this is a linear system over the vertices: trees are always
solvable, and every independent cycle adds one multiplicative
consistency condition.  When a cycle fails its condition, the violating
cycle and its defect ratio are returned as a certificate.

Per-gate calibration is unconditional: each gate has its own pulse, so
scaling gate m by sqrt(theta_m) corrects its angle by theta_m and, by
crosstalk nulling, touches nothing else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInput
from .solver import PulseSolution

CYCLE_TOL = 1e-9


@dataclass(frozen=True)
class CalibrationProblem:
    """Simple gate graph with positive per-edge angle factors."""

    edges: tuple[tuple[int, int, float], ...]

    @classmethod
    def create(cls, edges) -> "CalibrationProblem":
        seen = set()
        norm = []
        for i, j, theta in edges:
            if i == j:
                raise InvalidInput(f"self edge ({i},{j}) not allowed")
            if theta <= 0:
                raise InvalidInput(f"edge ({i},{j}): factor must be positive, got {theta}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise InvalidInput(f"duplicate edge {key}")
            seen.add(key)
            norm.append((key[0], key[1], float(theta)))
        return cls(edges=tuple(sorted(norm)))


@dataclass(frozen=True)
class CalibrationResult:
    feasible: bool
    knobs: dict[int, float] | None = None
    cycle: tuple[int, ...] | None = None
    defect: float | None = None

    def to_dict(self) -> dict:
        out: dict = {"feasible": self.feasible}
        if self.knobs is not None:
            out["knobs"] = {str(k): v for k, v in sorted(self.knobs.items())}
        if self.cycle is not None:
            out["cycle"] = list(self.cycle)
            out["defect"] = self.defect
        return out


def qubit_level_feasibility(problem: CalibrationProblem,
                            tol: float = CYCLE_TOL) -> CalibrationResult:
    """Solve the per-qubit knob system or certify its infeasibility.

    One knob per connected component is gauge (fixed to 1 at the
    smallest vertex); the rest follow along a spanning tree.  Every
    non-tree edge is then a cycle check: the implied product must match
    the measured factor to relative tolerance tol.
    """
    adjacency: dict[int, list[tuple[int, float]]] = {}
    for i, j, theta in problem.edges:
        adjacency.setdefault(i, []).append((j, theta))
        adjacency.setdefault(j, []).append((i, theta))

    log_knob: dict[int, float] = {}
    tree_parent: dict[int, int] = {}
    for root in sorted(adjacency):
        if root in log_knob:
            continue
        log_knob[root] = 0.0
        queue = [root]
        while queue:
            v = queue.pop(0)
            for u, theta in sorted(adjacency[v]):
                if u not in log_knob:
                    log_knob[u] = math.log(theta) - log_knob[v]
                    tree_parent[u] = v
                    queue.append(u)

    def tree_path(a: int, b: int) -> list[int]:
        up_a, up_b = [a], [b]
        while up_a[-1] in tree_parent:
            up_a.append(tree_parent[up_a[-1]])
        while up_b[-1] in tree_parent:
            up_b.append(tree_parent[up_b[-1]])
        common = set(up_a) & set(up_b)
        path_a = []
        for v in up_a:
            path_a.append(v)
            if v in common:
                break
        path_b = []
        for v in up_b:
            if v == path_a[-1]:
                break
            path_b.append(v)
        return path_a + path_b[::-1]

    tree_edges = {(min(u, v), max(u, v)) for u, v in tree_parent.items()}
    for i, j, theta in problem.edges:
        if (i, j) in tree_edges:
            continue
        implied = log_knob[i] + log_knob[j]
        defect_log = math.log(theta) - implied
        if abs(math.expm1(defect_log)) > tol:
            ratio = math.exp(abs(defect_log))
            return CalibrationResult(feasible=False,
                                     cycle=tuple(tree_path(i, j)),
                                     defect=ratio)
    return CalibrationResult(feasible=True,
                             knobs={v: math.exp(x) for v, x in log_knob.items()})


def gate_level_scaling(solution: PulseSolution, factors) -> PulseSolution:
    """Scale each gate by sqrt(factor): angle corrected by the factor.

    One factor per gate, all positive; other angles are untouched
    because crosstalk between distinct pulses is nulled.
    """
    factors = [float(f) for f in factors]
    if len(factors) != len(solution.gates):
        raise InvalidInput(
            f"{len(factors)} factors for {len(solution.gates)} gates")
    if any(f <= 0 for f in factors):
        raise InvalidInput("per-gate factors must be positive")
    gates = []
    for gate, f in zip(solution.gates, factors):
        s = math.sqrt(f)
        gates.append(replace(
            gate,
            coeffs=gate.coeffs * s,
            reduced=None if gate.reduced is None else gate.reduced * s,
            achieved=gate.achieved * f,
            target=gate.target * f))
    return replace(solution, gates=tuple(gates))


def amplitude_scales(factors) -> np.ndarray:
    """Per-gate amplitude scales sqrt(theta) for given angle factors."""
    factors = np.asarray(factors, dtype=float)
    if np.any(factors <= 0):
        raise InvalidInput("per-gate factors must be positive")
    return np.sqrt(factors)
