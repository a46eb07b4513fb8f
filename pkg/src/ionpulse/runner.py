"""Batch orchestration: configs, full runs, sweeps, and waveform export.

External I/O convention: ion and mode labels are 1-based (matching the
shipped chain data tables); everything internal is 0-based.  Frequencies
in files are MHz, durations in microseconds, amplitudes in rad/us.

Every artifact embeds the SHA-256 of its canonical config and the chain
provenance so results can be traced and reproduced byte-for-byte.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import BasisSet, build_basis
from .chain import ModeSpectrum, TrapModel, compute_modes, load_fixture
from .errors import ConfigError, IonPulseError, SamplingError
from .protocols import SequencedSchedule, disjoint_synthesize, sequencing_protocol
from .solver import (DesignSpace, GatePulse, GateSpec, PulseSolution,
                     SynthesisOptions, rebalance_power, synthesize)
from .verify import DEFAULT_SCAN_MHZ, VerificationReport, verify_solution

DEFAULT_GUARD_MHZ = 0.1
DEFAULT_AXIAL_MHZ = 0.3
DEFAULT_TRANSVERSE_MHZ = 2.9307
DEFAULT_ETA_SCALE = 0.112

PROTOCOLS = ("common", "sequencing", "disjoint")
SWEEP_KINDS = ("power_vs_index", "power_vs_n", "power_vs_tau")
PATTERNS = ("all_pairs", "half_disjoint", "two_disjoint")


def config_hash(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ChainSource:
    """Exactly one of fixture or trap-model parameters."""

    fixture: int | None = None
    n_ions: int | None = None
    axial_mhz: float = DEFAULT_AXIAL_MHZ
    transverse_mhz: float = DEFAULT_TRANSVERSE_MHZ
    eta_scale: float = DEFAULT_ETA_SCALE

    @classmethod
    def from_dict(cls, data: dict) -> "ChainSource":
        if not isinstance(data, dict):
            raise ConfigError("chain must be an object")
        has_fixture = data.get("fixture") is not None
        has_model = data.get("n_ions") is not None
        if has_fixture == has_model:
            raise ConfigError("chain needs exactly one of 'fixture' or 'n_ions'")
        if has_fixture:
            return cls(fixture=int(data["fixture"]))
        return cls(n_ions=int(data["n_ions"]),
                   axial_mhz=float(data.get("axial_mhz", DEFAULT_AXIAL_MHZ)),
                   transverse_mhz=float(data.get("transverse_mhz", DEFAULT_TRANSVERSE_MHZ)),
                   eta_scale=float(data.get("eta_scale", DEFAULT_ETA_SCALE)))

    def spectrum(self) -> ModeSpectrum:
        if self.fixture is not None:
            return load_fixture(self.fixture)
        model = TrapModel.from_mhz(self.n_ions, self.axial_mhz,
                                   self.transverse_mhz, self.eta_scale)
        return compute_modes(model)

    def provenance(self) -> str:
        if self.fixture is not None:
            return f"fixture-{self.fixture}"
        return (f"computed(n={self.n_ions},axial={self.axial_mhz}MHz,"
                f"transverse={self.transverse_mhz}MHz,eta={self.eta_scale})")

    def to_dict(self) -> dict:
        if self.fixture is not None:
            return {"fixture": self.fixture}
        return {"n_ions": self.n_ions, "axial_mhz": self.axial_mhz,
                "transverse_mhz": self.transverse_mhz, "eta_scale": self.eta_scale}


def parse_gates(raw) -> tuple[list[tuple[int, int]], list[float]]:
    """Gate list from config JSON: [[i, j], ...] or [{i, j, chi}, ...], 1-based."""
    pairs: list[tuple[int, int]] = []
    targets: list[float] = []
    if raw is None:
        return pairs, targets
    for entry in raw:
        if isinstance(entry, dict):
            i, j = int(entry["i"]), int(entry["j"])
            chi = float(entry.get("chi", math.pi / 2))
        else:
            i, j = int(entry[0]), int(entry[1])
            chi = math.pi / 2
        if min(i, j) < 1:
            raise ConfigError(f"ion labels are 1-based, got ({i},{j})")
        pairs.append((i - 1, j - 1))
        targets.append(chi)
    return pairs, targets


@dataclass(frozen=True)
class RunConfig:
    chain: ChainSource
    pairs: tuple[tuple[int, int], ...]
    targets: tuple[float, ...]
    tau_us: float
    guard_mhz: float = DEFAULT_GUARD_MHZ
    stabilization_order: int = 0
    protocol: str = "common"
    rebalance: bool = False
    strict_sign: bool = False
    output_dir: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        try:
            chain = ChainSource.from_dict(data["chain"])
            pairs, targets = parse_gates(data.get("gates", []))
            tau = float(data["tau_us"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid run config: {exc}") from exc
        protocol = data.get("protocol", "common")
        if protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {protocol!r}")
        if tau <= 0:
            raise ConfigError("tau_us must be positive")
        return cls(chain=chain, pairs=tuple(pairs), targets=tuple(targets),
                   tau_us=tau, guard_mhz=float(data.get("guard_mhz", DEFAULT_GUARD_MHZ)),
                   stabilization_order=int(data.get("stabilization_order", 0)),
                   protocol=protocol, rebalance=bool(data.get("rebalance", False)),
                   strict_sign=bool(data.get("strict_sign", False)),
                   output_dir=data.get("output_dir"))

    def to_dict(self) -> dict:
        return {"chain": self.chain.to_dict(),
                "gates": [{"i": i + 1, "j": j + 1, "chi": t}
                          for (i, j), t in zip(self.pairs, self.targets)],
                "tau_us": self.tau_us, "guard_mhz": self.guard_mhz,
                "stabilization_order": self.stabilization_order,
                "protocol": self.protocol, "rebalance": self.rebalance,
                "strict_sign": self.strict_sign}


def solution_to_dict(solution: PulseSolution) -> dict:
    return {
        "tau_us": solution.basis.tau,
        "stabilization_order": solution.basis.stabilization_order,
        "indices": solution.basis.indices.tolist(),
        "ion_count": solution.ion_count,
        "notes": list(solution.notes),
        "gates": [{
            "i": g.pair[0] + 1, "j": g.pair[1] + 1,
            "target": g.target, "achieved": g.achieved,
            "sign_flipped": g.sign_flipped,
            "mode": g.slot[0] + 1, "rank": g.slot[1],
            "weight": g.weight,
            "side_scales": {str(ion + 1): s for ion, s in sorted(g.side_scales.items())},
            "coeffs": g.coeffs.tolist(),
        } for g in solution.gates],
    }


def solution_from_dict(data: dict) -> PulseSolution:
    try:
        basis = BasisSet(tau=float(data["tau_us"]),
                         indices=np.asarray(data["indices"], dtype=int),
                         stabilization_order=int(data.get("stabilization_order", 0)))
        gates = []
        for g in data["gates"]:
            pair = (int(g["i"]) - 1, int(g["j"]) - 1)
            gates.append(GatePulse(
                pair=pair, target=float(g["target"]), achieved=float(g["achieved"]),
                sign_flipped=bool(g.get("sign_flipped", False)),
                slot=(int(g.get("mode", 1)) - 1, int(g.get("rank", 1))),
                weight=float(g.get("weight", 0.0)),
                coeffs=np.asarray(g["coeffs"], dtype=float),
                reduced=None,
                side_scales={int(k) - 1: float(v)
                             for k, v in g.get("side_scales", {}).items()}))
        return PulseSolution(basis=basis, ion_count=int(data["ion_count"]),
                             gates=tuple(gates), assignment=None,
                             notes=tuple(data.get("notes", [])))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solution payload: {exc}") from exc


@dataclass
class RunResult:
    config: RunConfig
    solution: PulseSolution | None
    schedule: SequencedSchedule | None
    report: VerificationReport | None
    slot_reports: list[VerificationReport] = field(default_factory=list)
    schedule_failures: list[str] = field(default_factory=list)
    summed_chi: np.ndarray | None = None
    files: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        if self.report is not None and not self.report.passed:
            return False
        if self.schedule_failures:
            return False
        return all(r.passed for r in self.slot_reports)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


def _verify_schedule(schedule: SequencedSchedule, spectrum: ModeSpectrum,
                     targets: dict[tuple[int, int], float]):
    """Per-slot decoupling checks plus slot-summed angle targets."""
    n = spectrum.ion_count
    total = np.zeros((n, n))
    reports = []
    for k in range(schedule.slot_count):
        rep = verify_solution(schedule.slot_solution(k), spectrum,
                              chi_target_tol=math.inf, chi_cross_tol=math.inf)
        reports.append(rep)
        total += rep.chi
    failures = []
    ions = sorted({i for g in schedule.base.gates for i in g.pair})
    for a, b in itertools.combinations(ions, 2):
        if (a, b) in targets:
            if abs(total[a, b] - targets[(a, b)]) > 1e-6:
                failures.append(f"slot-summed angle ({a},{b}) = {total[a, b]:.9f} "
                                f"misses {targets[(a, b)]:.9f}")
        elif abs(total[a, b]) > 1e-6:
            failures.append(f"slot-summed stray angle ({a},{b}) = {total[a, b]:.3e}")
    return reports, total, failures


def run(config: RunConfig) -> RunResult:
    """Synthesize per the config, always verify, optionally write files."""
    spectrum = config.chain.spectrum()
    basis = build_basis(config.tau_us, spectrum, config.guard_mhz,
                        order=config.stabilization_order)
    spec = GateSpec.create(list(config.pairs), list(config.targets)) \
        if config.pairs else GateSpec(pairs=(), targets=(), qubits=())
    options = SynthesisOptions(strict_sign=config.strict_sign)

    schedule = None
    slot_reports: list[VerificationReport] = []
    schedule_failures: list[str] = []
    summed = None
    if config.protocol == "sequencing" and spec.pairs:
        schedule = sequencing_protocol(spec, spectrum, basis, options=options)
        solution = schedule.base
        targets = {g.pair: g.achieved for g in schedule.base.gates}
        slot_reports, summed, schedule_failures = _verify_schedule(
            schedule, spectrum, targets)
        report = None
    else:
        if config.protocol == "disjoint" and spec.pairs:
            solution = disjoint_synthesize(spec, spectrum, basis, options=options)
        else:
            solution = synthesize(spec, spectrum, basis, options=options)
        if config.rebalance and solution.gates:
            solution = rebalance_power(solution)
        report = None
        if solution.gates:
            report = verify_solution(solution, spectrum,
                                     scan_deltas_mhz=DEFAULT_SCAN_MHZ)

    result = RunResult(config=config, solution=solution, schedule=schedule,
                       report=report, slot_reports=slot_reports,
                       schedule_failures=schedule_failures, summed_chi=summed)
    if config.output_dir:
        _write_run_outputs(result, spectrum)
    return result


def _write_run_outputs(result: RunResult, spectrum: ModeSpectrum) -> None:
    out = Path(result.config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config.to_dict()
    meta = {"config_sha256": config_hash(cfg),
            "chain_source": result.config.chain.provenance()}

    sol_path = out / "solution.json"
    payload = {**meta, "config": cfg}
    if result.schedule is not None:
        payload["protocol"] = "sequencing"
        payload["solution"] = solution_to_dict(result.schedule.base)
        payload["signs"] = result.schedule.signs.tolist()
        payload["slot_scale"] = result.schedule.slot_scale
    elif result.solution is not None:
        payload["protocol"] = result.config.protocol
        payload["solution"] = solution_to_dict(result.solution)
    sol_path.write_text(json.dumps(payload, indent=1, sort_keys=True))
    result.files.append(str(sol_path))

    rep_path = out / "report.json"
    rep: dict = {**meta, "passed": result.passed}
    if result.report is not None:
        rep["verification"] = result.report.to_dict()
        if result.report.detuning:
            scan_path = out / "detuning.csv"
            write_detuning_csv(
                [(d, m + 1, a) for d, m, a in result.report.detuning],
                scan_path, meta=meta)
            result.files.append(str(scan_path))
    if result.slot_reports:
        rep["slots"] = [r.to_dict() for r in result.slot_reports]
        rep["summed_chi"] = result.summed_chi.tolist()
        rep["schedule_failures"] = list(result.schedule_failures)
    rep_path.write_text(json.dumps(rep, indent=1, sort_keys=True))
    result.files.append(str(rep_path))

    if result.solution is not None and result.solution.gates:
        solution = result.solution
        basis = solution.basis
        rate = 16.0 * max(basis.indices) / basis.tau
        wav_path = out / "waveforms.csv"
        export_waveform(solution, rate, wav_path, meta=meta)
        result.files.append(str(wav_path))
        steps = max(1, int(round(basis.tau * rate)))
        times = np.linspace(0.0, basis.tau, steps + 1)
        for gate in solution.gates:
            vals = basis.sample(gate.coeffs, times)
            vals[0] = vals[-1] = 0.0
            gate_path = out / f"pulse_{gate.pair[0] + 1}-{gate.pair[1] + 1}.csv"
            lines = [f"# {k}={v}" for k, v in sorted(meta.items())]
            lines.append("time_us,amplitude_rad_per_us")
            lines.extend(f"{t:.9g},{v:.12g}" for t, v in zip(times, vals))
            gate_path.write_text("\n".join(lines) + "\n")
            result.files.append(str(gate_path))


def export_waveform(solution: PulseSolution, sample_rate: float, path,
                    meta: dict | None = None) -> None:
    """Sample per-ion waveforms to CSV: time_us, ion_index, amplitude_rad_per_us.

    sample_rate is in samples per microsecond and must exceed twice the
    highest basis frequency (Nyquist).
    """
    basis = solution.basis
    nyquist = 2.0 * float(np.max(basis.indices)) / basis.tau if basis.size else 0.0
    if sample_rate <= nyquist:
        raise SamplingError(
            f"sample rate {sample_rate}/us below Nyquist {nyquist:.6f}/us")
    steps = max(1, int(round(basis.tau * sample_rate)))
    times = np.linspace(0.0, basis.tau, steps + 1)
    lines = []
    if meta:
        lines.extend(f"# {k}={v}" for k, v in sorted(meta.items()))
    lines.append("time_us,ion_index,amplitude_rad_per_us")
    for ion in solution.ions():
        vals = basis.sample(solution.ion_coeffs(ion), times)
        vals[0] = 0.0    # sine series is exactly zero at both ends;
        vals[-1] = 0.0   # suppress roundoff in the samples
        for t, v in zip(times, vals):
            lines.append(f"{t:.9g},{ion + 1},{v:.12g}")
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class SweepConfig:
    kind: str
    ns: tuple[int, ...] = ()
    taus: tuple[float, ...] = ()
    patterns: tuple[str, ...] = ("all_pairs",)
    fixture_chains: bool = False
    axial_mhz: float = DEFAULT_AXIAL_MHZ
    transverse_mhz: float = DEFAULT_TRANSVERSE_MHZ
    eta_scale: float = DEFAULT_ETA_SCALE
    guard_mhz: float = DEFAULT_GUARD_MHZ
    stabilization_order: int = 0
    instances: int = 5
    seed: int = 0
    workers: int = 1
    output: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        kind = data.get("kind")
        if kind not in SWEEP_KINDS:
            raise ConfigError(f"sweep kind must be one of {SWEEP_KINDS}, got {kind!r}")
        patterns = tuple(data.get("patterns", ["all_pairs"]))
        for p in patterns:
            if p not in PATTERNS:
                raise ConfigError(f"pattern must be one of {PATTERNS}, got {p!r}")
        ns = tuple(int(n) for n in data.get("ns", []))
        taus = tuple(float(t) for t in data.get("taus", []))
        if kind == "power_vs_index" and (len(ns) != 1 or len(taus) != 1):
            raise ConfigError("power_vs_index needs exactly one n and one tau")
        if kind == "power_vs_n" and (not ns or len(taus) != 1):
            raise ConfigError("power_vs_n needs ns list and exactly one tau")
        if kind == "power_vs_tau" and (len(ns) != 1 or not taus):
            raise ConfigError("power_vs_tau needs exactly one n and a taus list")
        instances = int(data.get("instances", 5))
        if not (1 <= instances <= 20):
            raise ConfigError("instances must be in 1..20")
        return cls(kind=kind, ns=ns, taus=taus, patterns=patterns,
                   fixture_chains=bool(data.get("fixture_chains", False)),
                   axial_mhz=float(data.get("axial_mhz", DEFAULT_AXIAL_MHZ)),
                   transverse_mhz=float(data.get("transverse_mhz", DEFAULT_TRANSVERSE_MHZ)),
                   eta_scale=float(data.get("eta_scale", DEFAULT_ETA_SCALE)),
                   guard_mhz=float(data.get("guard_mhz", DEFAULT_GUARD_MHZ)),
                   stabilization_order=int(data.get("stabilization_order", 0)),
                   instances=instances, seed=int(data.get("seed", 0)),
                   workers=max(1, int(data.get("workers", 1))),
                   output=data.get("output"))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "ns": list(self.ns), "taus": list(self.taus),
                "patterns": list(self.patterns), "fixture_chains": self.fixture_chains,
                "axial_mhz": self.axial_mhz, "transverse_mhz": self.transverse_mhz,
                "eta_scale": self.eta_scale, "guard_mhz": self.guard_mhz,
                "stabilization_order": self.stabilization_order,
                "instances": self.instances, "seed": self.seed}

    def chain_for(self, n: int) -> ChainSource:
        if self.fixture_chains:
            return ChainSource(fixture=n)
        return ChainSource(n_ions=n, axial_mhz=self.axial_mhz,
                           transverse_mhz=self.transverse_mhz,
                           eta_scale=self.eta_scale)


def pattern_instances(pattern: str, n: int, instances: int,
                      rng: np.random.Generator) -> list[list[tuple[int, int]]]:
    """Seeded gate-pattern instances over an n-ion chain (0-based pairs)."""
    if pattern == "all_pairs":
        return [[(i, j) for i in range(n) for j in range(i + 1, n)]]
    k = n // 2 if pattern == "half_disjoint" else 2
    if 2 * k > n:
        raise ConfigError(f"pattern {pattern} needs at least {2 * k} ions, chain has {n}")
    seen = set()
    out = []
    for _ in range(instances * 8):
        perm = rng.permutation(n)
        pairs = tuple(sorted(tuple(sorted((int(perm[2 * m]), int(perm[2 * m + 1]))))
                             for m in range(k)))
        if pairs in seen:
            continue
        seen.add(pairs)
        out.append([tuple(p) for p in pairs])
        if len(out) == instances:
            break
    return out


@dataclass
class SweepPoint:
    key: tuple
    row: dict


def _solve_point(spectrum: ModeSpectrum, tau: float, guard: float, order: int,
                 pairs: list[tuple[int, int]],
                 space_cache: dict) -> PulseSolution:
    cache_key = (id(spectrum), tau, guard, order)
    if cache_key not in space_cache:
        basis = build_basis(tau, spectrum, guard, order=order)
        space_cache[cache_key] = DesignSpace.build(spectrum, basis)
    space = space_cache[cache_key]
    spec = GateSpec.create(pairs)
    return synthesize(spec, spectrum, space.basis, space=space)


def sweep(config: SweepConfig) -> list[dict]:
    """Run the sweep and return rows; failures recorded, never dropped."""
    rng = np.random.default_rng(config.seed)
    rows: list[dict] = []

    if config.kind == "power_vs_index":
        n, tau = config.ns[0], config.taus[0]
        spectrum = config.chain_for(n).spectrum()
        cache: dict = {}
        pairs = pattern_instances("all_pairs", spectrum.ion_count, 1, rng)[0]
        try:
            sol = _solve_point(spectrum, tau, config.guard_mhz,
                               config.stabilization_order, pairs, cache)
            for rank, g in enumerate(sol.gates, start=1):
                rows.append({"gate_rank": rank, "ion_i": g.pair[0] + 1,
                             "ion_j": g.pair[1] + 1, "mode_p": g.slot[0] + 1,
                             "lambda": g.slot[1], "gbar": g.rms(), "status": "ok"})
        except IonPulseError as exc:
            rows.append({"gate_rank": 0, "ion_i": 0, "ion_j": 0, "mode_p": 0,
                         "lambda": 0, "gbar": math.nan,
                         "status": f"failed: {exc}"})
        return rows

    if config.kind == "power_vs_n":
        points = [(n, config.taus[0]) for n in config.ns]
    else:
        points = [(config.ns[0], tau) for tau in config.taus]

    def solve_group(point):
        n, tau = point
        group_rows = []
        # Seed depends on the chain only, so tau points share instances
        # (required to compare power across durations) and output stays
        # order-independent under concurrency.
        point_rng = np.random.default_rng((config.seed, n))
        try:
            spectrum = config.chain_for(n).spectrum()
        except IonPulseError as exc:
            for pattern in config.patterns:
                group_rows.append(_failed_row(config.kind, n, tau, pattern, str(exc)))
            return group_rows
        cache: dict = {}
        for pattern in config.patterns:
            try:
                instance_sets = pattern_instances(pattern, spectrum.ion_count,
                                                  config.instances, point_rng)
                gbars: list[float] = []
                n_gates = 0
                for pairs in instance_sets:
                    sol = _solve_point(spectrum, tau, config.guard_mhz,
                                       config.stabilization_order, pairs, cache)
                    gbars.extend(sol.gate_rms())
                    n_gates = len(pairs)
                row = {"n_ions": n, "tau_us": tau, "pattern": pattern,
                       "mean_gbar": float(np.mean(gbars)),
                       "max_gbar": float(np.max(gbars)),
                       "n_gates": n_gates, "n_instances": len(instance_sets),
                       "status": "ok"}
            except IonPulseError as exc:
                row = _failed_row(config.kind, n, tau, pattern, str(exc))
            group_rows.append(row)
        return group_rows

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            grouped = list(pool.map(solve_group, points))
    else:
        grouped = [solve_group(p) for p in points]
    for group in grouped:
        rows.extend(group)
    rows.sort(key=lambda r: (r.get("n_ions", 0), r.get("tau_us", 0.0),
                             r.get("pattern", "")))
    return rows


def _failed_row(kind: str, n: int, tau: float, pattern: str, reason: str) -> dict:
    return {"n_ions": n, "tau_us": tau, "pattern": pattern,
            "mean_gbar": math.nan, "max_gbar": math.nan, "n_gates": 0,
            "n_instances": 0, "status": f"failed: {reason}"}


def write_sweep_csv(rows: list[dict], config: SweepConfig, path) -> None:
    cfg = config.to_dict()
    meta = [f"# config_sha256={config_hash(cfg)}",
            f"# chains={'fixtures' if config.fixture_chains else 'computed'}"]
    if not rows:
        Path(path).write_text("\n".join(meta) + "\n")
        return
    header = list(rows[0].keys())
    lines = meta + [",".join(header)]
    for row in rows:
        cells = []
        for key in header:
            val = row[key]
            if isinstance(val, float):
                cells.append(f"{val:.12g}")
            else:
                cells.append(str(val))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_detuning_csv(table: list[tuple[float, int, float]], path,
                       meta: dict | None = None) -> None:
    """Detuning scan rows: delta_mhz, mode_index (1-based), alpha_abs."""
    lines = []
    if meta:
        lines.extend(f"# {k}={v}" for k, v in sorted(meta.items()))
    lines.append("delta_mhz,mode_index,alpha_abs")
    for delta_mhz, mode, alpha in table:
        lines.append(f"{delta_mhz:.12g},{mode},{alpha:.12g}")
    Path(path).write_text("\n".join(lines) + "\n")
