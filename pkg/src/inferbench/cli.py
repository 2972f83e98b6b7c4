"""Command-line interface: run, sweep, replay, conformance, and report.

Exit codes: 0 for a valid run, 2 for a run flagged invalid (error rate over
the threshold, or a sweep with failed batches), 1 for failures such as
config defects, unreachable runners, and protocol errors. Set
BENCH_NO_COLOR to disable ANSI color in text output.
"""

from __future__ import annotations

import argparse
import os
import shlex
import sys
from dataclasses import replace
from pathlib import Path

from .artifacts import replay_run_dir, write_run_dir
from .config import ConfigError, load_config
from .energy import TraceParseError
from .loadgen import EmptyRunError, PartialRunError, execute_run, run_batch_sweep
from .metrics import AllSamplesFailedError, EmptySampleError, InvalidMeasurementError
from .protocol import (
    HandshakeError,
    InferTimeoutError,
    ProtocolError,
    ProtocolParseError,
    SessionClosedError,
    StdioTransport,
    TcpTransport,
    TransportError,
    check_conformance,
    open_session,
)
from .report import default_objectives, emit_json, emit_table, frontier_records, load_json, pareto_frontier
from .sampling import SamplerError

_RED = "\033[31m"
_GREEN = "\033[32m"
_RESET = "\033[0m"


def _use_color() -> bool:
    if os.environ.get("BENCH_NO_COLOR"):
        return False
    return sys.stdout.isatty()


def _paint(text: str, color: str) -> str:
    if not _use_color():
        return text
    return f"{color}{text}{_RESET}"


def _print_table(records, quiet: bool) -> None:
    if quiet or not records:
        return
    table = emit_table(records, fmt="text")
    if _use_color():
        table = table.replace("! invalid", _paint("! invalid", _RED))
    print(table, end="")


def _add_run_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="path to the JSON run config")
    parser.add_argument("--output", help="output directory (overrides config.output)")
    parser.add_argument("--seed", type=int, help="seed override (overrides config.seed)")
    parser.add_argument("--quiet", action="store_true", help="do not print the text table")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inferbench",
        description="Benchmark inference runners: latency, throughput, energy, carbon.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one benchmark run and write artifacts")
    _add_run_args(run_p)

    sweep_p = sub.add_parser("sweep", help="run the config's batch sweep")
    _add_run_args(sweep_p)

    replay_p = sub.add_parser(
        "replay", help="recompute all metrics from a stored run directory (no runner needed)"
    )
    replay_p.add_argument("run_dir", help="directory holding report.json and trace CSVs")
    replay_p.add_argument("--output", help="write the recomputed artifacts here")
    replay_p.add_argument("--quiet", action="store_true")

    conf_p = sub.add_parser("conformance", help="check a runner against the protocol contract")
    conf_p.add_argument("--config", help="JSON run config; only its runner section is used")
    conf_p.add_argument("--runner-cmd", help="runner command line to spawn over stdio")
    conf_p.add_argument("--tcp", help="host:port of an already-running runner")
    conf_p.add_argument("--transcripts", action="store_true", help="include wire transcripts")

    report_p = sub.add_parser(
        "report", help="re-render tables and Pareto frontiers from report.json files"
    )
    report_p.add_argument("reports", nargs="+", help="one or more report.json files")
    report_p.add_argument("--output", help="write the merged report.json/report.csv here")
    report_p.add_argument("--quiet", action="store_true")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    plan = cfg.plan
    if args.seed is not None:
        plan = replace(plan, seed=args.seed)
    if plan.batch_sweep is not None:
        raise ConfigError("config.batch_sweep: present in config; use the sweep subcommand")
    out_dir = args.output or plan.output_dir
    if out_dir is None:
        raise ConfigError("config.output: missing (set it in the config or pass --output)")

    session = open_session(cfg.runner)
    try:
        raw = execute_run(plan, session)
    finally:
        session.close()
    artifacts = write_run_dir(out_dir, raw, plan.carbon_factors, cfg.fingerprint, plan.seed, cfg.raw)
    _print_table(artifacts.records, args.quiet)
    if any(r.invalid for r in artifacts.records):
        print("run flagged invalid: error rate above threshold", file=sys.stderr)
        return 2
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    plan = cfg.plan
    if args.seed is not None:
        plan = replace(plan, seed=args.seed)
    if plan.batch_sweep is None:
        raise ConfigError("config.batch_sweep: required by the sweep subcommand")
    out_dir = args.output or plan.output_dir
    if out_dir is None:
        raise ConfigError("config.output: missing (set it in the config or pass --output)")

    session = open_session(cfg.runner)
    try:
        results = run_batch_sweep(plan, session)
    finally:
        session.close()
    artifacts = write_run_dir(out_dir, results, plan.carbon_factors, cfg.fingerprint, plan.seed, cfg.raw)
    _print_table(artifacts.records, args.quiet)
    status = 0
    for failure in artifacts.failures:
        print(f"sweep batch failed: {failure}", file=sys.stderr)
        status = 2
    if any(r.invalid for r in artifacts.records):
        print("one or more runs flagged invalid: error rate above threshold", file=sys.stderr)
        status = 2
    return status


def _cmd_replay(args: argparse.Namespace) -> int:
    artifacts = replay_run_dir(args.run_dir, output_dir=args.output)
    _print_table(artifacts.records, args.quiet)
    return 2 if any(r.invalid for r in artifacts.records) else 0


def _conformance_transport(args: argparse.Namespace):
    given = [x for x in (args.config, args.runner_cmd, args.tcp) if x]
    if len(given) != 1:
        raise ConfigError("conformance: give exactly one of --config, --runner-cmd, or --tcp")
    if args.config:
        return load_config(args.config).runner
    if args.runner_cmd:
        command = tuple(shlex.split(args.runner_cmd))
        if not command:
            raise ConfigError("conformance: --runner-cmd is empty")
        return StdioTransport(command=command)
    host, sep, port = args.tcp.partition(":")
    if not sep or not port.isdigit():
        raise ConfigError("conformance: --tcp expects host:port")
    return TcpTransport(host=host, port=int(port))


def _cmd_conformance(args: argparse.Namespace) -> int:
    report = check_conformance(_conformance_transport(args))
    text = report.render(include_transcripts=args.transcripts)
    if _use_color():
        text = text.replace("PASS ", _paint("PASS", _GREEN) + " ")
        text = text.replace("FAIL ", _paint("FAIL", _RED) + " ")
    print(text)
    return 0 if report.passed else 1


def _cmd_report(args: argparse.Namespace) -> int:
    records = []
    for path in args.reports:
        records.extend(load_json(Path(path).read_text(encoding="utf-8")))
    if not records:
        raise ConfigError("report: no records found in the given files")
    records.sort(key=lambda r: (r.model_name, r.precision))
    _print_table(records, args.quiet)
    objectives = default_objectives(records)
    points = pareto_frontier(records, objectives)
    if not args.quiet:
        names = ", ".join(f"{name} {direction}" for name, direction in objectives)
        print(f"\nPareto frontier over ({names}):")
        for record in frontier_records(points):
            print(f"  {record.model_name}  {record.platform_precision}")
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(emit_json(records), encoding="utf-8", newline="\n")
        (out / "report.csv").write_text(
            emit_table(records, fmt="csv"), encoding="utf-8", newline="\n"
        )
    return 0


_FAILURE_EXCEPTIONS = (
    ConfigError,
    TraceParseError,
    TransportError,
    HandshakeError,
    ProtocolParseError,
    ProtocolError,
    SessionClosedError,
    InferTimeoutError,
    SamplerError,
    EmptyRunError,
    AllSamplesFailedError,
    EmptySampleError,
    InvalidMeasurementError,
    OSError,
)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "replay": _cmd_replay,
        "conformance": _cmd_conformance,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except PartialRunError as exc:
        print(
            f"inferbench: partial run: {exc} ({len(exc.samples)} samples completed)",
            file=sys.stderr,
        )
        return 1
    except _FAILURE_EXCEPTIONS as exc:
        print(f"inferbench: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
