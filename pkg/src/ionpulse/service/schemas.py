"""Pydantic request/response models for the pulse-compiler service.

Wire convention matches the file formats: 1-based ion and mode labels,
MHz frequencies, microsecond durations, rad/us amplitudes.
"""

from __future__ import annotations

import math

from pydantic import BaseModel, Field, model_validator


class ChainSpec(BaseModel):
    """Exactly one of fixture or a parametric trap model."""

    fixture: int | None = None
    n_ions: int | None = None
    axial_mhz: float = 0.3
    transverse_mhz: float = 2.9307
    eta_scale: float = 0.112

    @model_validator(mode="after")
    def _one_source(self):
        if (self.fixture is None) == (self.n_ions is None):
            raise ValueError("chain needs exactly one of 'fixture' or 'n_ions'")
        return self


class GateEdge(BaseModel):
    i: int = Field(ge=1)
    j: int = Field(ge=1)
    chi: float = math.pi / 2

    @model_validator(mode="after")
    def _distinct(self):
        if self.i == self.j:
            raise ValueError("gate needs two distinct ions")
        return self


class ModesRequest(BaseModel):
    chain: ChainSpec


class ModesResponse(BaseModel):
    source: str
    frequencies_mhz: list[float]
    lamb_dicke: list[list[float]]


class SynthesizeRequest(BaseModel):
    chain: ChainSpec
    gates: list[GateEdge]
    tau_us: float = Field(gt=0)
    guard_mhz: float = 0.1
    stabilization_order: int = Field(default=0, ge=0)
    protocol: str = "common"
    rebalance: bool = False
    strict_sign: bool = False
    include_coeffs: bool = True


class GateResult(BaseModel):
    i: int
    j: int
    target: float
    achieved: float
    sign_flipped: bool
    mode: int
    rank: int
    weight: float
    gbar: float
    side_scales: dict[str, float]
    coeffs: list[float] | None = None


class VerificationSummary(BaseModel):
    passed: bool
    failures: list[str]
    max_alpha_ratio: float
    chi: list[list[float]]
    gbar_ion: dict[str, float]


class SolutionPayload(BaseModel):
    """Round-trippable solution: enough to re-verify or export."""

    tau_us: float
    stabilization_order: int = 0
    indices: list[int]
    ion_count: int
    notes: list[str] = []
    gates: list[dict]


class SynthesizeResponse(BaseModel):
    tau_us: float
    basis_size: int
    indices_lo: int
    indices_hi: int
    protocol: str
    gates: list[GateResult]
    notes: list[str]
    verification: VerificationSummary
    solution: SolutionPayload | None = None
    signs: list[list[int]] | None = None
    slot_scale: float | None = None


class VerifyRequest(BaseModel):
    chain: ChainSpec
    solution: SolutionPayload


class CalibrationEdge(BaseModel):
    i: int = Field(ge=1)
    j: int = Field(ge=1)
    theta: float = Field(gt=0)


class CalibrateRequest(BaseModel):
    edges: list[CalibrationEdge]


class CalibrateResponse(BaseModel):
    feasible: bool
    knobs: dict[str, float] | None = None
    cycle: list[int] | None = None
    defect: float | None = None
