"""Benchmark records, Pareto frontiers, and table/CSV/JSON emission.

A BenchmarkRecord is one (model, platform, precision, device) row joining
the five metric families: latency distribution, throughput, energy,
carbon, and optional accuracy. Text and CSV tables mirror the column
structure Throughput / Latency (ms) / Energy (Wh) / CE (mg); JSON carries
full precision and round-trips losslessly.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .energy import CarbonFactors, CarbonReading, EnergyReading, compute_carbon, integrate_energy
from .loadgen import RawRunRecord
from .metrics import (
    LatencyDistribution,
    LatencyMode,
    RangeStats,
    ThroughputReading,
    WorkloadDescriptor,
    compute_throughput,
    summarize_latencies,
    summarize_workload,
    unit_for_item_kind,
)
from .protocol import AccuracyMetadata, DeviceAnnotations, Handshake

REPORT_VERSION = 1

#: Runs whose error rate exceeds this fraction are flagged invalid.
INVALID_ERROR_RATE = 0.10


@dataclass(frozen=True)
class BenchmarkRecord:
    """One comparable benchmark row; the unit of Pareto analysis."""

    model_name: str
    platform: str
    precision: str
    device: DeviceAnnotations
    traffic: dict
    workload: WorkloadDescriptor
    latency: LatencyDistribution
    throughput: ThroughputReading
    energy: EnergyReading
    carbon: CarbonReading
    error_count: int
    seed: int
    config_fingerprint: str
    accuracy: AccuracyMetadata | None = None

    def __post_init__(self) -> None:
        if self.error_count < 0:
            raise ValueError("error_count must be >= 0")
        if self.carbon.energy != self.energy:
            raise ValueError("carbon reading was computed from a different energy reading")

    @property
    def invalid(self) -> bool:
        return self.error_count > INVALID_ERROR_RATE * self.workload.total_requests

    @property
    def platform_precision(self) -> str:
        return f"{self.platform}, {self.precision}"


def assemble_record(
    raw: RawRunRecord,
    factors: CarbonFactors,
    config_fingerprint: str,
    latency_mode: LatencyMode = "response-time",
    quantiles: Sequence[float] = (0.50, 0.95, 0.99),
) -> BenchmarkRecord:
    """Join one raw run into a BenchmarkRecord.

    The same function serves live runs and replay from stored artifacts, so
    recomputation is bit-identical. Latency defaults to the response-time
    view (queueing included); for sequential traffic the two views coincide.
    """
    workload = summarize_workload(raw.samples, raw.sequence_lengths)
    latency = summarize_latencies(raw.samples, mode=latency_mode, quantiles=quantiles)
    unit = unit_for_item_kind(raw.handshake.item_kind)
    throughput = compute_throughput(latency, workload, unit)
    energy = integrate_energy(raw.trace, raw.window_ns)
    carbon = compute_carbon(energy, factors)
    return BenchmarkRecord(
        model_name=raw.handshake.model_name,
        platform=raw.handshake.platform,
        precision=raw.handshake.precision,
        device=raw.handshake.device,
        traffic=dict(raw.traffic),
        workload=workload,
        latency=latency,
        throughput=throughput,
        energy=energy,
        carbon=carbon,
        error_count=raw.error_count,
        seed=raw.seed,
        config_fingerprint=config_fingerprint,
        accuracy=raw.handshake.accuracy,
    )


# ---------------------------------------------------------------------------
# Pareto frontiers
# ---------------------------------------------------------------------------

Objective = tuple[str, str]  # (metric name, "min" | "max")

_METRIC_GETTERS: dict[str, Callable[[BenchmarkRecord], float | None]] = {
    # tail latency is the default "latency" objective
    "latency": lambda r: r.latency.p95_ms,
    "latency_mean": lambda r: r.latency.mean_ms,
    "latency_p50": lambda r: r.latency.p50_ms,
    "latency_p95": lambda r: r.latency.p95_ms,
    "latency_p99": lambda r: r.latency.p99_ms,
    "throughput": lambda r: r.throughput.value,
    "energy": lambda r: r.energy.energy_wh,
    "carbon": lambda r: r.carbon.carbon_g,
    "accuracy": lambda r: r.accuracy.value if r.accuracy is not None else None,
}

OBJECTIVE_METRICS = tuple(_METRIC_GETTERS)


@dataclass(frozen=True)
class ParetoPoint:
    """A record's position in objective space, with its dominance verdict."""

    index: int
    record: BenchmarkRecord
    objectives: tuple[float, ...]
    dominated: bool
    dominated_by: int | None = None


def default_objectives(records: Sequence[BenchmarkRecord]) -> list[Objective]:
    """Latency/energy/carbon minimized, throughput maximized; accuracy
    maximized too when every record reports it."""
    objectives: list[Objective] = [
        ("latency", "min"),
        ("energy", "min"),
        ("carbon", "min"),
        ("throughput", "max"),
    ]
    if records and all(r.accuracy is not None for r in records):
        objectives.append(("accuracy", "max"))
    return objectives


def _dominates(a: tuple[float, ...], b: tuple[float, ...]) -> bool:
    """Strict Pareto dominance on minimization vectors."""
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def pareto_frontier(
    records: Sequence[BenchmarkRecord],
    objectives: Sequence[Objective],
) -> list[ParetoPoint]:
    """Classify records under strict Pareto dominance.

    Returns one ParetoPoint per evaluated record, in input order; frontier
    members have dominated=False, and every dominated point names a frontier
    member as witness. Records missing an objective metric are excluded
    with a warning. Ties (identical vectors) all stay on the frontier.
    """
    if len(records) == 0:
        raise ValueError("at least one record is required")
    if len(objectives) == 0:
        raise ValueError("objective list must not be empty")
    getters = []
    for name, direction in objectives:
        if name not in _METRIC_GETTERS:
            raise ValueError(f"unknown objective metric {name!r} (choose from {OBJECTIVE_METRICS})")
        if direction not in ("min", "max"):
            raise ValueError(f"objective direction must be 'min' or 'max', got {direction!r}")
        getters.append((_METRIC_GETTERS[name], -1.0 if direction == "max" else 1.0))

    evaluated: list[tuple[int, BenchmarkRecord, tuple[float, ...], tuple[float, ...]]] = []
    for index, record in enumerate(records):
        raw_values = []
        keyed = []
        missing = None
        for (getter, sign), (name, _) in zip(getters, objectives):
            value = getter(record)
            if value is None:
                missing = name
                break
            raw_values.append(float(value))
            keyed.append(sign * float(value))
        if missing is not None:
            warnings.warn(
                f"record {index} ({record.model_name}, {record.platform_precision}) "
                f"has no {missing!r} metric; excluded from Pareto analysis",
                stacklevel=2,
            )
            continue
        evaluated.append((index, record, tuple(raw_values), tuple(keyed)))

    # Incremental frontier maintenance: the running frontier is mutually
    # non-dominating, so a candidate dominated by any member can be
    # discarded without rechecking the rest.
    frontier: list[int] = []  # positions into evaluated
    for pos, (_, _, _, key) in enumerate(evaluated):
        dominated = False
        survivors = []
        for member in frontier:
            member_key = evaluated[member][3]
            if _dominates(member_key, key):
                dominated = True
                survivors = frontier
                break
            if not _dominates(key, member_key):
                survivors.append(member)
        frontier = survivors if dominated else survivors + [pos]

    frontier_set = set(frontier)
    points: list[ParetoPoint] = []
    for pos, (index, record, raw_values, key) in enumerate(evaluated):
        if pos in frontier_set:
            points.append(ParetoPoint(index, record, raw_values, dominated=False))
            continue
        witness = None
        for member in sorted(frontier_set):
            if _dominates(evaluated[member][3], key):
                witness = evaluated[member][0]
                break
        points.append(ParetoPoint(index, record, raw_values, dominated=True, dominated_by=witness))
    return points


def frontier_records(points: Iterable[ParetoPoint]) -> list[BenchmarkRecord]:
    return [p.record for p in points if not p.dominated]


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------

# Formatting mirrors the published table style: 2 decimals for throughput,
# latency, and CE (mg); 3 decimals for energy (Wh).
def _fmt2(value: float) -> str:
    return f"{value:.2f}"


def _fmt3(value: float) -> str:
    return f"{value:.3f}"


def _base_cells(record: BenchmarkRecord) -> list[str]:
    return [
        record.model_name,
        record.platform_precision,
        _fmt2(record.throughput.value),
        _fmt2(record.latency.mean_ms),
        _fmt3(record.energy.energy_wh),
        _fmt2(record.carbon.carbon_g * 1000.0),
    ]


_NUMBER_RE = re.compile(r"^-?\d+(\.\d+)?([eE][+-]?\d+)?$")


def _csv_field(value: str) -> str:
    if value != "" and _NUMBER_RE.match(value):
        return value
    return '"' + value.replace('"', '""') + '"'


def render_csv(rows: Sequence[Sequence[str]]) -> str:
    """Canonical CSV: numeric fields bare, text fields quoted, LF endings."""
    return "\n".join(",".join(_csv_field(cell) for cell in row) for row in rows) + "\n"


def parse_csv(text: str) -> list[list[str]]:
    """Inverse of render_csv; render_csv(parse_csv(x)) is byte-stable."""
    import csv
    import io

    return [row for row in csv.reader(io.StringIO(text))]


def _traffic_cell(traffic: dict, key: str) -> str:
    value = traffic.get(key)
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_table(records: Sequence[BenchmarkRecord], fmt: str = "text") -> str:
    """Render records as a comparison table.

    Text mode mirrors the published column structure and omits the accuracy
    column when no record reports one; CSV mode appends traffic and seed
    metadata columns and always carries an (possibly empty) accuracy cell.
    """
    if len(records) == 0:
        raise ValueError("at least one record is required")
    if fmt not in ("text", "csv"):
        raise ValueError(f"unknown table format {fmt!r}")

    units = {r.throughput.unit for r in records}
    throughput_header = f"Throughput ({units.pop()})" if len(units) == 1 else "Throughput"

    if fmt == "csv":
        header = [
            "Model",
            "Platform & Precision",
            "Throughput",
            "Latency (ms)",
            "Energy (Wh)",
            "CE (mg)",
            "Accuracy",
            "Flags",
            "Unit",
            "Basis",
            "Traffic Mode",
            "Batch Size",
            "Rate (rps)",
            "Concurrency",
            "Iterations",
            "Duration (s)",
            "Seed",
            "Error Count",
            "Total Requests",
            "p50 (ms)",
            "p95 (ms)",
            "p99 (ms)",
            "PUE",
            "Kappa (kg/kWh)",
            "Region",
        ]
        rows = [header]
        for r in records:
            rows.append(
                _base_cells(r)
                + [
                    _fmt3(r.accuracy.value) if r.accuracy is not None else "",
                    "invalid" if r.invalid else "",
                    r.throughput.unit,
                    r.throughput.basis,
                    str(r.traffic.get("mode", "")),
                    _traffic_cell(r.traffic, "batch_size"),
                    _traffic_cell(r.traffic, "rate_rps"),
                    _traffic_cell(r.traffic, "concurrency"),
                    _traffic_cell(r.traffic, "iterations"),
                    _traffic_cell(r.traffic, "duration_s"),
                    str(r.seed),
                    str(r.error_count),
                    str(r.workload.total_requests),
                    _fmt2(r.latency.p50_ms),
                    _fmt2(r.latency.p95_ms),
                    _fmt2(r.latency.p99_ms),
                    repr(r.carbon.factors.pue),
                    repr(r.carbon.factors.kappa_kg_per_kwh),
                    r.carbon.factors.region_label,
                ]
            )
        return render_csv(rows)

    show_accuracy = any(r.accuracy is not None for r in records)
    show_flags = any(r.invalid for r in records)
    header = ["Model", "Platform & Precision", throughput_header, "Latency (ms)", "Energy (Wh)", "CE (mg)"]
    if show_accuracy:
        header.append("Accuracy")
    if show_flags:
        header.append("Flags")
    table = [header]
    for r in records:
        row = _base_cells(r)
        if show_accuracy:
            row.append(_fmt3(r.accuracy.value) if r.accuracy is not None else "")
        if show_flags:
            row.append("! invalid" if r.invalid else "")
        table.append(row)

    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = []
    for row_index, row in enumerate(table):
        cells = []
        for i, cell in enumerate(row):
            # text columns left-aligned, numeric right-aligned
            if i < 2 or (show_flags and i == len(row) - 1):
                cells.append(cell.ljust(widths[i]))
            else:
                cells.append(cell.rjust(widths[i]))
        lines.append("  ".join(cells).rstrip())
        if row_index == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# JSON serialization (lossless, round-tripping)
# ---------------------------------------------------------------------------


def _range_stats_to_dict(stats: RangeStats | None) -> dict | None:
    if stats is None:
        return None
    return {"min": stats.min, "mean": stats.mean, "max": stats.max}


def _range_stats_from_dict(obj: dict | None) -> RangeStats | None:
    if obj is None:
        return None
    return RangeStats(min=obj["min"], mean=obj["mean"], max=obj["max"])


def record_to_dict(record: BenchmarkRecord) -> dict:
    return {
        "model_name": record.model_name,
        "platform": record.platform,
        "precision": record.precision,
        "device": {
            "device_name": record.device.device_name,
            "interconnect": record.device.interconnect,
            "memory_type": record.device.memory_type,
            "power_management": record.device.power_management,
        },
        "traffic": record.traffic,
        "workload": {
            "batch_size_stats": _range_stats_to_dict(record.workload.batch_size_stats),
            "sequence_length_stats": _range_stats_to_dict(record.workload.sequence_length_stats),
            "total_requests": record.workload.total_requests,
            "total_items": record.workload.total_items,
        },
        "latency": {
            "count": record.latency.count,
            "mean_ms": record.latency.mean_ms,
            "head_ms": record.latency.head_ms,
            "percentiles_ms": {str(q): v for q, v in sorted(record.latency.percentiles_ms.items())},
            "max_ms": record.latency.max_ms,
        },
        "throughput": {
            "value": record.throughput.value,
            "unit": record.throughput.unit,
            "basis": record.throughput.basis,
        },
        "energy": {
            "energy_wh": record.energy.energy_wh,
            "window_ns": list(record.energy.window_ns),
            "sample_count": record.energy.sample_count,
        },
        "carbon": {
            "carbon_g": record.carbon.carbon_g,
            "factors": {
                "pue": record.carbon.factors.pue,
                "kappa_kg_per_kwh": record.carbon.factors.kappa_kg_per_kwh,
                "region_label": record.carbon.factors.region_label,
                "timestamp_label": record.carbon.factors.timestamp_label,
            },
        },
        "accuracy": (
            {"metric_name": record.accuracy.metric_name, "value": record.accuracy.value}
            if record.accuracy is not None
            else None
        ),
        "error_count": record.error_count,
        "seed": record.seed,
        "config_fingerprint": record.config_fingerprint,
        "invalid": record.invalid,
    }


def record_from_dict(obj: dict) -> BenchmarkRecord:
    energy = EnergyReading(
        energy_wh=obj["energy"]["energy_wh"],
        window_ns=tuple(obj["energy"]["window_ns"]),
        sample_count=obj["energy"]["sample_count"],
    )
    factors = CarbonFactors(
        pue=obj["carbon"]["factors"]["pue"],
        kappa_kg_per_kwh=obj["carbon"]["factors"]["kappa_kg_per_kwh"],
        region_label=obj["carbon"]["factors"]["region_label"],
        timestamp_label=obj["carbon"]["factors"]["timestamp_label"],
    )
    accuracy = None
    if obj.get("accuracy") is not None:
        accuracy = AccuracyMetadata(
            metric_name=obj["accuracy"]["metric_name"], value=obj["accuracy"]["value"]
        )
    return BenchmarkRecord(
        model_name=obj["model_name"],
        platform=obj["platform"],
        precision=obj["precision"],
        device=DeviceAnnotations(
            device_name=obj["device"]["device_name"],
            interconnect=obj["device"]["interconnect"],
            memory_type=obj["device"]["memory_type"],
            power_management=obj["device"]["power_management"],
        ),
        traffic=dict(obj["traffic"]),
        workload=WorkloadDescriptor(
            batch_size_stats=_range_stats_from_dict(obj["workload"]["batch_size_stats"]),
            total_requests=obj["workload"]["total_requests"],
            total_items=obj["workload"]["total_items"],
            sequence_length_stats=_range_stats_from_dict(obj["workload"]["sequence_length_stats"]),
        ),
        latency=LatencyDistribution(
            count=obj["latency"]["count"],
            mean_ms=obj["latency"]["mean_ms"],
            head_ms=obj["latency"]["head_ms"],
            percentiles_ms={float(q): v for q, v in obj["latency"]["percentiles_ms"].items()},
            max_ms=obj["latency"]["max_ms"],
        ),
        throughput=ThroughputReading(
            value=obj["throughput"]["value"],
            unit=obj["throughput"]["unit"],
            basis=obj["throughput"]["basis"],
        ),
        energy=energy,
        carbon=CarbonReading(carbon_g=obj["carbon"]["carbon_g"], factors=factors, energy=energy),
        error_count=obj["error_count"],
        seed=obj["seed"],
        config_fingerprint=obj["config_fingerprint"],
        accuracy=accuracy,
    )


def emit_json(records: Sequence[BenchmarkRecord]) -> str:
    """Lossless JSON document for a list of records (report_version 1)."""
    doc = {"report_version": REPORT_VERSION, "records": [record_to_dict(r) for r in records]}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def load_json(text: str) -> list[BenchmarkRecord]:
    doc = json.loads(text)
    version = doc.get("report_version")
    if version != REPORT_VERSION:
        raise ValueError(f"unsupported report_version {version!r}")
    return [record_from_dict(obj) for obj in doc["records"]]
