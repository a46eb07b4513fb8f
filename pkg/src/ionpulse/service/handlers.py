"""Service-layer handlers: pydantic models in, pydantic models out.

The FastAPI app and the CLI both call these, so in-process and HTTP
clients see identical behavior.
"""

from __future__ import annotations

from ..calibrate import CalibrationProblem, qubit_level_feasibility
from ..errors import ConfigError
from ..runner import ChainSource, RunConfig, run, solution_from_dict, solution_to_dict
from ..verify import verify_solution
from . import schemas


def _chain_source(chain: schemas.ChainSpec) -> ChainSource:
    if chain.fixture is not None:
        return ChainSource(fixture=chain.fixture)
    return ChainSource(n_ions=chain.n_ions, axial_mhz=chain.axial_mhz,
                       transverse_mhz=chain.transverse_mhz,
                       eta_scale=chain.eta_scale)


def handle_modes(req: schemas.ModesRequest) -> schemas.ModesResponse:
    spectrum = _chain_source(req.chain).spectrum()
    return schemas.ModesResponse(
        source=spectrum.source,
        frequencies_mhz=spectrum.frequencies_mhz.tolist(),
        lamb_dicke=spectrum.lamb_dicke.tolist())


def _verification_summary(report) -> schemas.VerificationSummary:
    return schemas.VerificationSummary(
        passed=report.passed, failures=list(report.failures),
        max_alpha_ratio=report.max_alpha_ratio(),
        chi=report.chi.tolist(),
        gbar_ion={str(i + 1): float(v) for i, v in report.gbar_ion.items()})


def _merged_schedule_summary(result) -> schemas.VerificationSummary:
    failures = list(result.schedule_failures)
    ratio = 0.0
    gbar: dict[str, float] = {}
    for k, rep in enumerate(result.slot_reports):
        failures.extend(f"slot {k}: {msg}" for msg in rep.failures)
        ratio = max(ratio, rep.max_alpha_ratio())
        for i, v in rep.gbar_ion.items():
            gbar[str(i + 1)] = max(gbar.get(str(i + 1), 0.0), float(v))
    chi = result.summed_chi.tolist() if result.summed_chi is not None else []
    return schemas.VerificationSummary(
        passed=result.passed, failures=failures, max_alpha_ratio=ratio,
        chi=chi, gbar_ion=gbar)


def handle_synthesize(req: schemas.SynthesizeRequest) -> schemas.SynthesizeResponse:
    config = RunConfig(
        chain=_chain_source(req.chain),
        pairs=tuple((g.i - 1, g.j - 1) for g in req.gates),
        targets=tuple(g.chi for g in req.gates),
        tau_us=req.tau_us, guard_mhz=req.guard_mhz,
        stabilization_order=req.stabilization_order,
        protocol=req.protocol, rebalance=req.rebalance,
        strict_sign=req.strict_sign)
    if req.protocol not in ("common", "sequencing", "disjoint"):
        raise ConfigError(f"unknown protocol {req.protocol!r}")
    result = run(config)
    solution = result.solution

    gates = []
    for g in solution.gates:
        gates.append(schemas.GateResult(
            i=g.pair[0] + 1, j=g.pair[1] + 1, target=g.target,
            achieved=g.achieved, sign_flipped=g.sign_flipped,
            mode=g.slot[0] + 1, rank=g.slot[1], weight=g.weight, gbar=g.rms(),
            side_scales={str(k + 1): v for k, v in sorted(g.side_scales.items())},
            coeffs=g.coeffs.tolist() if req.include_coeffs else None))

    if result.report is not None:
        verification = _verification_summary(result.report)
    elif result.slot_reports:
        verification = _merged_schedule_summary(result)
    else:
        verification = schemas.VerificationSummary(
            passed=True, failures=[], max_alpha_ratio=0.0, chi=[], gbar_ion={})

    payload = schemas.SolutionPayload(**solution_to_dict(solution)) \
        if req.include_coeffs else None
    basis = solution.basis
    return schemas.SynthesizeResponse(
        tau_us=basis.tau, basis_size=basis.size,
        indices_lo=int(basis.indices[0]) if basis.size else 0,
        indices_hi=int(basis.indices[-1]) if basis.size else 0,
        protocol=req.protocol, gates=gates, notes=list(solution.notes),
        verification=verification, solution=payload,
        signs=result.schedule.signs.tolist() if result.schedule else None,
        slot_scale=result.schedule.slot_scale if result.schedule else None)


def handle_verify(req: schemas.VerifyRequest) -> schemas.VerificationSummary:
    spectrum = _chain_source(req.chain).spectrum()
    solution = solution_from_dict(req.solution.model_dump())
    report = verify_solution(solution, spectrum)
    return _verification_summary(report)


def handle_calibrate(req: schemas.CalibrateRequest) -> schemas.CalibrateResponse:
    problem = CalibrationProblem.create(
        [(e.i, e.j, e.theta) for e in req.edges])
    result = qubit_level_feasibility(problem)
    return schemas.CalibrateResponse(
        feasible=result.feasible,
        knobs=None if result.knobs is None
        else {str(k): v for k, v in sorted(result.knobs.items())},
        cycle=None if result.cycle is None else list(result.cycle),
        defect=result.defect)
