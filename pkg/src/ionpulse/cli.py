"""Command-line front end.

Subcommands: modes, synth, verify, sweep, calibrate, export.  The
service-backed commands (modes, synth, verify, calibrate) build the same
request models the HTTP API uses and execute them in-process, or against
a running server when --server is given.  sweep and export are local
batch operations that write CSV files.

Exit codes: 0 success, 1 verification tolerance failure, 2 config
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .errors import ConfigError, IonPulseError
from .service import handlers, schemas


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc


class ServiceClient:
    """Dispatch to in-process handlers or a remote server."""

    def __init__(self, server: str | None):
        self.server = server.rstrip("/") if server else None

    def call(self, endpoint: str, request, response_model):
        if self.server is None:
            handler = {
                "modes": handlers.handle_modes,
                "synthesize": handlers.handle_synthesize,
                "verify": handlers.handle_verify,
                "calibrate": handlers.handle_calibrate,
            }[endpoint]
            return handler(request)
        import httpx

        reply = httpx.post(f"{self.server}/{endpoint}",
                           json=request.model_dump(), timeout=3600.0)
        if reply.status_code == 400:
            raise ConfigError(reply.json().get("detail", reply.text))
        if reply.status_code >= 401:
            raise IonPulseError(reply.json().get("detail", reply.text))
        return response_model.model_validate(reply.json())


def _chain_spec(args) -> schemas.ChainSpec:
    if args.fixture is not None:
        return schemas.ChainSpec(fixture=args.fixture)
    if args.n_ions is None:
        raise ConfigError("specify a chain: --fixture N or --n-ions N [trap flags]")
    return schemas.ChainSpec(n_ions=args.n_ions, axial_mhz=args.axial_mhz,
                             transverse_mhz=args.transverse_mhz,
                             eta_scale=args.eta_scale)


def _add_chain_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--fixture", type=int, default=None,
                        help="tabulated chain size (7, 9, 11, or 13)")
    parser.add_argument("--n-ions", type=int, default=None,
                        help="compute the chain from a parametric trap model")
    parser.add_argument("--axial-mhz", type=float, default=0.3)
    parser.add_argument("--transverse-mhz", type=float, default=2.9307)
    parser.add_argument("--eta-scale", type=float, default=0.112)


def _parse_edges(edges: list[str]) -> list[schemas.GateEdge]:
    out = []
    for text in edges:
        parts = text.split(":")
        ions = parts[0].split(",")
        if len(ions) != 2:
            raise ConfigError(f"bad gate spec {text!r}; expected i,j or i,j:chi")
        chi = float(parts[1]) if len(parts) > 1 else math.pi / 2
        out.append(schemas.GateEdge(i=int(ions[0]), j=int(ions[1]), chi=chi))
    return out


def _write_or_print(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, indent=1, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def cmd_modes(args) -> int:
    client = ServiceClient(args.server)
    response = client.call("modes", schemas.ModesRequest(chain=_chain_spec(args)),
                           schemas.ModesResponse)
    _write_or_print(response.model_dump(), args.output)
    return 0


def cmd_synth(args) -> int:
    if args.config:
        data = _load_json(args.config)
        chain = schemas.ChainSpec(**data["chain"])
        gates = [schemas.GateEdge(**g) if isinstance(g, dict)
                 else schemas.GateEdge(i=g[0], j=g[1]) for g in data.get("gates", [])]
        request = schemas.SynthesizeRequest(
            chain=chain, gates=gates, tau_us=data["tau_us"],
            guard_mhz=data.get("guard_mhz", 0.1),
            stabilization_order=data.get("stabilization_order", 0),
            protocol=data.get("protocol", "common"),
            rebalance=data.get("rebalance", False),
            strict_sign=data.get("strict_sign", False))
        outdir = args.output_dir or data.get("output_dir")
    else:
        request = schemas.SynthesizeRequest(
            chain=_chain_spec(args), gates=_parse_edges(args.gate or []),
            tau_us=args.tau_us, guard_mhz=args.guard_mhz,
            stabilization_order=args.stabilization_order,
            protocol=args.protocol, rebalance=args.rebalance,
            strict_sign=args.strict_sign)
        outdir = args.output_dir
    if outdir and args.server is None:
        # Local batch path: write solution/report/waveform files directly.
        from .runner import RunConfig, run

        config = RunConfig.from_dict({**request.model_dump(exclude={"include_coeffs"}),
                                      "gates": [g.model_dump() for g in request.gates],
                                      "chain": request.chain.model_dump(exclude_none=True),
                                      "output_dir": outdir})
        result = run(config)
        for name in result.files:
            print(f"wrote {name}")
        if not result.passed:
            print("verification FAILED (see report.json)", file=sys.stderr)
            return 1
        return 0
    client = ServiceClient(args.server)
    response = client.call("synthesize", request, schemas.SynthesizeResponse)
    if outdir:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "synthesis.json").write_text(
            json.dumps(response.model_dump(), indent=1, sort_keys=True) + "\n")
        print(f"wrote {out / 'synthesis.json'}")
    else:
        trimmed = response.model_dump()
        if trimmed.get("solution"):
            for gate in trimmed["solution"]["gates"]:
                gate["coeffs"] = f"[{len(gate['coeffs'])} coefficients]"
        for gate in trimmed["gates"]:
            if gate.get("coeffs"):
                gate["coeffs"] = f"[{len(gate['coeffs'])} coefficients]"
        print(json.dumps(trimmed, indent=1, sort_keys=True))
    if not response.verification.passed:
        print("verification FAILED:", file=sys.stderr)
        for line in response.verification.failures:
            print(f"  {line}", file=sys.stderr)
        return 1
    return 0


def cmd_verify(args) -> int:
    data = _load_json(args.solution)
    payload = data.get("solution", data)
    chain = schemas.ChainSpec(**data["config"]["chain"]) if "config" in data \
        else _chain_spec(args)
    request = schemas.VerifyRequest(chain=chain,
                                    solution=schemas.SolutionPayload(**payload))
    client = ServiceClient(args.server)
    response = client.call("verify", request, schemas.VerificationSummary)
    _write_or_print(response.model_dump(), args.output)
    return 0 if response.passed else 1


def cmd_calibrate(args) -> int:
    edges = []
    if args.edges:
        for line in Path(args.edges).read_text().strip().splitlines():
            if line.startswith("#") or line.lower().startswith("i,"):
                continue
            i, j, theta = line.split(",")
            edges.append(schemas.CalibrationEdge(i=int(i), j=int(j),
                                                 theta=float(theta)))
    else:
        for text in args.edge or []:
            i, j, theta = text.split(",")
            edges.append(schemas.CalibrationEdge(i=int(i), j=int(j),
                                                 theta=float(theta)))
    if not edges:
        raise ConfigError("no edges given; use --edges FILE or --edge i,j,theta")
    client = ServiceClient(args.server)
    response = client.call("calibrate", schemas.CalibrateRequest(edges=edges),
                           schemas.CalibrateResponse)
    _write_or_print(response.model_dump(), args.output)
    return 0


def cmd_sweep(args) -> int:
    from .runner import SweepConfig, sweep, write_sweep_csv

    if args.config:
        data = _load_json(args.config)
    else:
        data = {"kind": args.kind, "ns": args.ns or [], "taus": args.taus or [],
                "patterns": args.patterns or ["all_pairs"],
                "fixture_chains": args.fixture_chains, "seed": args.seed,
                "instances": args.instances, "workers": args.workers}
    config = SweepConfig.from_dict(data)
    rows = sweep(config)
    out = args.output or data.get("output") or "sweep.csv"
    write_sweep_csv(rows, config, out)
    failed = [r for r in rows if r.get("status", "ok") != "ok"]
    print(f"wrote {out} ({len(rows)} rows, {len(failed)} failed points)")
    return 0


def cmd_export(args) -> int:
    from .runner import export_waveform, solution_from_dict

    data = _load_json(args.solution)
    solution = solution_from_dict(data.get("solution", data))
    export_waveform(solution, args.rate, args.output,
                    meta={"source": args.solution})
    print(f"wrote {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ionpulse",
        description="Compile and verify parallel entangling-gate pulses")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service; default in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("modes", help="motional-mode table for a chain")
    _add_chain_flags(p)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("synth", help="synthesize and verify a gate set")
    _add_chain_flags(p)
    p.add_argument("--config", default=None, help="JSON run config")
    p.add_argument("--gate", action="append",
                   help="gate as i,j or i,j:chi (repeatable, 1-based ions)")
    p.add_argument("--tau-us", type=float, default=300.0)
    p.add_argument("--guard-mhz", type=float, default=0.1)
    p.add_argument("--stabilization-order", type=int, default=0)
    p.add_argument("--protocol", choices=["common", "sequencing", "disjoint"],
                   default="common")
    p.add_argument("--rebalance", action="store_true")
    p.add_argument("--strict-sign", action="store_true")
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("verify", help="re-verify a stored solution")
    _add_chain_flags(p)
    p.add_argument("solution", help="solution JSON (from synth --output-dir)")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="power sweeps to CSV")
    p.add_argument("--config", default=None, help="JSON sweep config")
    p.add_argument("--kind", choices=["power_vs_index", "power_vs_n", "power_vs_tau"])
    p.add_argument("--ns", type=int, nargs="*")
    p.add_argument("--taus", type=float, nargs="*")
    p.add_argument("--patterns", nargs="*",
                   choices=["all_pairs", "half_disjoint", "two_disjoint"])
    p.add_argument("--fixture-chains", action="store_true")
    p.add_argument("--instances", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="per-qubit knob feasibility")
    p.add_argument("--edges", default=None, help="CSV file with i,j,theta rows")
    p.add_argument("--edge", action="append", help="edge as i,j,theta (repeatable)")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("export", help="sample waveforms to CSV")
    p.add_argument("solution", help="solution JSON")
    p.add_argument("--rate", type=float, required=True,
                   help="samples per microsecond (must exceed Nyquist)")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except IonPulseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
