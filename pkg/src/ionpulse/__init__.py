"""Compiler and verifier for parallel entangling-gate pulses on ion chains.

Pipeline: chain spectra (chain) -> sine basis and decoupling null space
(basis) -> per-mode phase kernels (coupling) -> gate/mode assignment
(assign) -> iterative synthesis, rebalancing (solver) -> alternative
protocols (protocols) -> independent quadrature verification (verify).
Batch orchestration lives in runner; the HTTP surface in service; the
CLI in cli.
"""

from .basis import BasisSet, build_basis
from .chain import ModeSpectrum, TrapModel, compute_modes, load_fixture
from .solver import GateSpec, PulseSolution, rebalance_power, synthesize
from .verify import VerificationReport, verify_solution

__version__ = "0.1.0"

__all__ = [
    "BasisSet", "build_basis", "ModeSpectrum", "TrapModel", "compute_modes",
    "load_fixture", "GateSpec", "PulseSolution", "rebalance_power",
    "synthesize", "VerificationReport", "verify_solution", "__version__",
]
