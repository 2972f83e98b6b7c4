"""Run artifacts on disk and their deterministic replay.

A run directory holds report.json (records plus the raw samples they were
computed from), report.csv, one trace CSV per run, and an archived copy of
the config. report.json contains no wall-clock metadata, so replaying a
stored run recomputes every metric from the raw material and reproduces
the report byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .config import ConfigError, parse_carbon
from .energy import CarbonFactors, read_trace_csv, write_trace_csv
from .loadgen import RawRunRecord, SweepResult
from .metrics import LatencySample
from .protocol import AccuracyMetadata, DeviceAnnotations, Handshake
from .report import REPORT_VERSION, BenchmarkRecord, assemble_record, emit_table, record_to_dict

REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"
TRACE_CSV = "trace.csv"
CONFIG_COPY = "config.json"


def _sample_to_dict(sample: LatencySample) -> dict:
    return {
        "request_id": sample.request_id,
        "intended_start_ns": sample.intended_start_ns,
        "actual_start_ns": sample.actual_start_ns,
        "end_ns": sample.end_ns,
        "batch_size": sample.batch_size,
        "outcome": sample.outcome,
    }


def _sample_from_dict(obj: dict) -> LatencySample:
    return LatencySample(
        request_id=obj["request_id"],
        intended_start_ns=obj["intended_start_ns"],
        actual_start_ns=obj["actual_start_ns"],
        end_ns=obj["end_ns"],
        batch_size=obj["batch_size"],
        outcome=obj["outcome"],
    )


def _handshake_to_dict(handshake: Handshake) -> dict:
    return {
        "protocol_version": handshake.protocol_version,
        "model_name": handshake.model_name,
        "platform": handshake.platform,
        "precision": handshake.precision,
        "item_kind": handshake.item_kind,
        "device": {
            "device_name": handshake.device.device_name,
            "interconnect": handshake.device.interconnect,
            "memory_type": handshake.device.memory_type,
            "power_management": handshake.device.power_management,
        },
        "accuracy": (
            {"metric_name": handshake.accuracy.metric_name, "value": handshake.accuracy.value}
            if handshake.accuracy is not None
            else None
        ),
    }


def _handshake_from_dict(obj: dict) -> Handshake:
    accuracy = None
    if obj.get("accuracy") is not None:
        accuracy = AccuracyMetadata(
            metric_name=obj["accuracy"]["metric_name"], value=obj["accuracy"]["value"]
        )
    return Handshake(
        protocol_version=obj["protocol_version"],
        model_name=obj["model_name"],
        platform=obj["platform"],
        precision=obj["precision"],
        item_kind=obj["item_kind"],
        device=DeviceAnnotations(
            device_name=obj["device"]["device_name"],
            interconnect=obj["device"]["interconnect"],
            memory_type=obj["device"]["memory_type"],
            power_management=obj["device"]["power_management"],
        ),
        accuracy=accuracy,
    )


def _raw_run_to_dict(raw: RawRunRecord, trace_csv: str) -> dict:
    return {
        "failed": False,
        "error": None,
        "batch_size": raw.traffic.get("batch_size"),
        "trace_csv": trace_csv,
        "traffic": raw.traffic,
        "handshake": _handshake_to_dict(raw.handshake),
        "warmup_iterations": raw.warmup_iterations,
        "seed": raw.seed,
        "window_ns": list(raw.window_ns),
        "sequence_lengths": list(raw.sequence_lengths) if raw.sequence_lengths is not None else None,
        "samples": [_sample_to_dict(s) for s in raw.samples],
    }


def _render_report_json(
    fingerprint: str, seed: int, config_raw: dict, records: list[dict], raw_runs: list[dict]
) -> str:
    doc = {
        "report_version": REPORT_VERSION,
        "config_fingerprint": fingerprint,
        "seed": seed,
        "config": config_raw,
        "records": records,
        "raw_runs": raw_runs,
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class RunArtifacts:
    """What a run wrote (or a replay recomputed)."""

    records: tuple[BenchmarkRecord, ...]
    report_json: str
    report_csv: str
    failures: tuple[str, ...] = ()


def _trace_name(result: SweepResult | None) -> str:
    if result is None:
        return TRACE_CSV
    return f"trace_b{result.batch_size}.csv"


def build_artifacts(
    results: list[SweepResult] | RawRunRecord,
    factors: CarbonFactors,
    fingerprint: str,
    seed: int,
    config_raw: dict,
) -> tuple[RunArtifacts, list[tuple[str, object]]]:
    """Assemble records and rendered artifact text from raw run results.

    Returns the artifacts plus the list of (filename, PowerTrace) pairs the
    caller should write next to the report.
    """
    if isinstance(results, RawRunRecord):
        sweep = [SweepResult(batch_size=results.traffic.get("batch_size", 0), record=results)]
        single = True
    else:
        sweep = results
        single = False

    records: list[BenchmarkRecord] = []
    record_dicts: list[dict] = []
    raw_dicts: list[dict] = []
    traces: list[tuple[str, object]] = []
    failures: list[str] = []
    for result in sweep:
        if result.failed:
            failures.append(f"batch {result.batch_size}: {result.error}")
            raw_dicts.append(
                {
                    "failed": True,
                    "error": result.error,
                    "batch_size": result.batch_size,
                    "trace_csv": None,
                }
            )
            continue
        raw = result.record
        trace_csv = TRACE_CSV if single else _trace_name(result)
        record = assemble_record(raw, factors, fingerprint)
        records.append(record)
        record_dicts.append(record_to_dict(record))
        raw_dicts.append(_raw_run_to_dict(raw, trace_csv))
        traces.append((trace_csv, raw.trace))

    report_json = _render_report_json(fingerprint, seed, config_raw, record_dicts, raw_dicts)
    report_csv = emit_table(records, fmt="csv") if records else ""
    artifacts = RunArtifacts(
        records=tuple(records),
        report_json=report_json,
        report_csv=report_csv,
        failures=tuple(failures),
    )
    return artifacts, traces


def write_run_dir(
    out_dir: str | Path,
    results: list[SweepResult] | RawRunRecord,
    factors: CarbonFactors,
    fingerprint: str,
    seed: int,
    config_raw: dict,
) -> RunArtifacts:
    """Write report.json, report.csv, trace CSV(s), and the archived config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts, traces = build_artifacts(results, factors, fingerprint, seed, config_raw)
    for name, trace in traces:
        write_trace_csv(trace, out / name)
    (out / REPORT_JSON).write_text(artifacts.report_json, encoding="utf-8", newline="\n")
    (out / REPORT_CSV).write_text(artifacts.report_csv, encoding="utf-8", newline="\n")
    (out / CONFIG_COPY).write_text(
        json.dumps(config_raw, sort_keys=True, indent=2) + "\n", encoding="utf-8", newline="\n"
    )
    return artifacts


def replay_run_dir(run_dir: str | Path, output_dir: str | Path | None = None) -> RunArtifacts:
    """Recompute all metrics of a stored run from its raw samples and traces.

    Pure recomputation: given identical inputs the rendered report.json is
    bit-identical to the original. When output_dir is given, the recomputed
    report.json/report.csv are written there along with byte-identical
    copies of the trace CSVs and the archived config.
    """
    run_dir = Path(run_dir)
    report_path = run_dir / REPORT_JSON
    if not report_path.exists():
        raise ConfigError(f"replay: {report_path} does not exist")
    doc = json.loads(report_path.read_text(encoding="utf-8"))
    if doc.get("report_version") != REPORT_VERSION:
        raise ConfigError(f"replay: unsupported report_version {doc.get('report_version')!r}")
    config_raw = doc["config"]
    factors = parse_carbon(config_raw["carbon"])
    fingerprint = doc["config_fingerprint"]
    seed = doc["seed"]

    results: list[SweepResult] = []
    for entry in doc["raw_runs"]:
        if entry.get("failed"):
            results.append(
                SweepResult(batch_size=entry.get("batch_size") or 0, error=entry.get("error"))
            )
            continue
        trace = read_trace_csv(run_dir / entry["trace_csv"])
        seq = entry.get("sequence_lengths")
        raw = RawRunRecord(
            traffic=entry["traffic"],
            handshake=_handshake_from_dict(entry["handshake"]),
            samples=tuple(_sample_from_dict(s) for s in entry["samples"]),
            trace=trace,
            window_ns=tuple(entry["window_ns"]),
            warmup_iterations=entry["warmup_iterations"],
            seed=entry["seed"],
            sequence_lengths=tuple(seq) if seq is not None else None,
        )
        results.append(SweepResult(batch_size=entry.get("batch_size") or 0, record=raw))

    single = len(results) == 1 and not results[0].failed and (
        doc["raw_runs"][0].get("trace_csv") == TRACE_CSV
    )
    payload: list[SweepResult] | RawRunRecord = results[0].record if single else results
    artifacts, traces = build_artifacts(payload, factors, fingerprint, seed, config_raw)

    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, _ in traces:
            (out / name).write_bytes((run_dir / name).read_bytes())
        (out / REPORT_JSON).write_text(artifacts.report_json, encoding="utf-8", newline="\n")
        (out / REPORT_CSV).write_text(artifacts.report_csv, encoding="utf-8", newline="\n")
        (out / CONFIG_COPY).write_text(
            json.dumps(config_raw, sort_keys=True, indent=2) + "\n", encoding="utf-8", newline="\n"
        )
    return artifacts
