"""Latency, throughput, and workload statistics from timed request samples.

All sample timestamps are integer nanoseconds from one monotonic clock;
summaries report milliseconds. Percentiles follow the nearest-rank rule
(the value at 1-based index ceil(q*N) of the sorted sample), so every
reported quantile is an observed data point, never an interpolation.

Throughput here is the achieved completion rate. It is bounded above by,
and distinct from, bandwidth (the theoretical ceiling of a channel or
memory bus); bandwidth is not a measured quantity in this harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Mapping, Sequence

import numpy as np

SUCCESS = "success"
ERROR = "error"

LatencyMode = Literal["service-time", "response-time"]
ThroughputUnit = Literal["samples/s", "tokens/s", "requests/s", "transactions/s"]
ThroughputBasis = Literal["per-batch", "per-request"]

THROUGHPUT_UNITS = ("samples/s", "tokens/s", "requests/s", "transactions/s")
LATENCY_MODES = ("service-time", "response-time")

#: Quantiles every distribution reports, whatever else the caller asks for.
REQUIRED_QUANTILES = (0.50, 0.95, 0.99)

# Validation slack for the mean: fsum is exact, but the final division can
# land one ulp outside [head, max] when all samples are equal.
_MEAN_RTOL = 1e-9


class EmptySampleError(ValueError):
    """No samples were provided."""


class AllSamplesFailedError(ValueError):
    """Every sample has outcome=error, so there are no latencies to summarize."""

    def __init__(self, failure_count: int):
        super().__init__(
            f"all {failure_count} samples failed; no successful latencies to summarize"
        )
        self.failure_count = failure_count


class InvalidMeasurementError(ValueError):
    """A derived metric cannot be computed from the given measurements."""


class SequenceShapeError(ValueError):
    """sequence_lengths is not aligned 1:1 with the samples."""


@dataclass(frozen=True)
class LatencySample:
    """One timed request.

    ``intended_start_ns`` is when the request was scheduled to arrive (the
    open-loop arrival time); ``actual_start_ns`` is when it was actually
    sent. Measuring from the intended start keeps queueing delay in the
    numbers instead of silently omitting it.
    """

    request_id: int
    intended_start_ns: int
    actual_start_ns: int
    end_ns: int
    batch_size: int
    outcome: str = SUCCESS

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (self.end_ns >= self.actual_start_ns >= self.intended_start_ns):
            raise ValueError(
                "timestamps must satisfy end >= actual_start >= intended_start, got "
                f"({self.intended_start_ns}, {self.actual_start_ns}, {self.end_ns})"
            )
        if self.outcome not in (SUCCESS, ERROR):
            raise ValueError(f"outcome must be 'success' or 'error', got {self.outcome!r}")

    @property
    def service_time_ms(self) -> float:
        return (self.end_ns - self.actual_start_ns) / 1e6

    @property
    def response_time_ms(self) -> float:
        return (self.end_ns - self.intended_start_ns) / 1e6

    def interval_ms(self, mode: LatencyMode) -> float:
        if mode == "service-time":
            return self.service_time_ms
        if mode == "response-time":
            return self.response_time_ms
        raise ValueError(f"unknown latency mode {mode!r}")


@dataclass(frozen=True)
class RangeStats:
    """A min/mean/max triple."""

    min: float
    mean: float
    max: float

    def __post_init__(self) -> None:
        span = max(abs(self.min), abs(self.max), 1e-12)
        if not (self.min - span * _MEAN_RTOL <= self.mean <= self.max + span * _MEAN_RTOL):
            raise ValueError(f"require min <= mean <= max, got {self}")
        if self.min > self.max:
            raise ValueError(f"require min <= max, got {self}")


@dataclass(frozen=True)
class LatencyDistribution:
    """Latency summary: count, mean, head (minimum), percentiles, max, all in ms."""

    count: int
    mean_ms: float
    head_ms: float
    percentiles_ms: Mapping[float, float]
    max_ms: float

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("count must be >= 1")
        for q in REQUIRED_QUANTILES:
            if q not in self.percentiles_ms:
                raise ValueError(f"percentiles must include q={q}")
        ordered = sorted(self.percentiles_ms)
        values = [self.head_ms] + [self.percentiles_ms[q] for q in ordered] + [self.max_ms]
        for lo, hi in zip(values, values[1:]):
            if lo > hi:
                raise ValueError(
                    f"percentiles must be monotone between head and max, got {values}"
                )
        span = max(abs(self.head_ms), abs(self.max_ms), 1e-12)
        tol = span * _MEAN_RTOL
        if not (self.head_ms - tol <= self.mean_ms <= self.max_ms + tol):
            raise ValueError(
                f"mean {self.mean_ms} outside [head, max] = [{self.head_ms}, {self.max_ms}]"
            )

    def quantile(self, q: float) -> float:
        return self.percentiles_ms[q]

    @property
    def p50_ms(self) -> float:
        return self.percentiles_ms[0.50]

    @property
    def p95_ms(self) -> float:
        return self.percentiles_ms[0.95]

    @property
    def p99_ms(self) -> float:
        return self.percentiles_ms[0.99]


@dataclass(frozen=True)
class ThroughputReading:
    """Completed items per second, tagged with unit and counting basis."""

    value: float
    unit: str
    basis: str

    def __post_init__(self) -> None:
        if self.unit not in THROUGHPUT_UNITS:
            raise ValueError(f"unknown throughput unit {self.unit!r}")
        if self.basis not in ("per-batch", "per-request"):
            raise ValueError(f"unknown throughput basis {self.basis!r}")


@dataclass(frozen=True)
class WorkloadDescriptor:
    """Describes the offered load: batch-size and token-length statistics."""

    batch_size_stats: RangeStats
    total_requests: int
    total_items: int
    sequence_length_stats: RangeStats | None = None

    def __post_init__(self) -> None:
        if self.total_requests < 1:
            raise ValueError("total_requests must be >= 1")
        if self.total_items < self.total_requests and self.sequence_length_stats is None:
            raise ValueError(
                "total_items cannot be below total_requests when batch sizes are >= 1"
            )


def nearest_rank_index(q: float, n: int) -> int:
    """0-based index of the nearest-rank quantile q in a sorted sample of size n.

    Rank arithmetic uses the decimal value of q exactly, so q=0.95 with
    n=100 lands on rank 95 rather than drifting on binary float error.
    """
    if not 0.0 < q <= 1.0:
        raise ValueError(f"quantile must be in (0, 1], got {q}")
    if n < 1:
        raise EmptySampleError("no values to rank")
    rank = math.ceil(Fraction(str(q)) * n)
    return min(max(rank, 1), n) - 1


def summarize_latencies(
    samples: Sequence[LatencySample],
    mode: LatencyMode = "service-time",
    quantiles: Sequence[float] = REQUIRED_QUANTILES,
) -> LatencyDistribution:
    """Summarize successful samples into a LatencyDistribution.

    ``mode`` selects the measured interval: service-time is end minus
    actual_start; response-time is end minus intended_start and therefore
    includes queueing delay. Failed samples are excluded (count them
    separately); summarizing only failures raises AllSamplesFailedError.
    """
    if len(samples) == 0:
        raise EmptySampleError("no samples provided")
    if mode not in LATENCY_MODES:
        raise ValueError(f"unknown latency mode {mode!r}")
    ok = [s for s in samples if s.outcome == SUCCESS]
    if not ok:
        raise AllSamplesFailedError(len(samples))

    qs = sorted({float(q) for q in quantiles} | set(REQUIRED_QUANTILES))
    values = np.sort(np.array([s.interval_ms(mode) for s in ok], dtype=np.float64))
    n = len(values)
    percentiles = {q: float(values[nearest_rank_index(q, n)]) for q in qs}
    # fsum gives one exactly-rounded sum, so the mean is permutation invariant.
    mean = math.fsum(values.tolist()) / n
    return LatencyDistribution(
        count=n,
        mean_ms=mean,
        head_ms=float(values[0]),
        percentiles_ms=percentiles,
        max_ms=float(values[-1]),
    )


def unit_for_item_kind(item_kind: str) -> str:
    """Map a runner's declared item kind to its throughput unit."""
    mapping = {"sample": "samples/s", "token": "tokens/s", "request": "requests/s"}
    try:
        return mapping[item_kind]
    except KeyError:
        raise ValueError(f"unknown item kind {item_kind!r}") from None


def compute_throughput(
    distribution: LatencyDistribution,
    workload: WorkloadDescriptor,
    unit: str,
) -> ThroughputReading:
    """Throughput as items-per-request divided by mean latency in seconds.

    For samples/s the item count per request is the mean batch size; for
    tokens/s it is the mean token count (sequence-length stats required);
    requests/s and transactions/s count each request as one item. The unit
    and basis are carried on the reading so token- and sample-based numbers
    are never compared silently.
    """
    if unit not in THROUGHPUT_UNITS:
        raise ValueError(f"unknown throughput unit {unit!r}")
    if distribution.mean_ms <= 0:
        raise InvalidMeasurementError(
            f"mean latency must be positive to derive throughput, got {distribution.mean_ms}"
        )
    if unit == "tokens/s":
        if workload.sequence_length_stats is None:
            raise InvalidMeasurementError(
                "token throughput requires sequence-length statistics"
            )
        items = workload.sequence_length_stats.mean
        basis = "per-batch"
    elif unit in ("requests/s", "transactions/s"):
        items = 1.0
        basis = "per-request"
    else:
        items = workload.batch_size_stats.mean
        basis = "per-batch"
    return ThroughputReading(value=items / (distribution.mean_ms / 1e3), unit=unit, basis=basis)


def summarize_workload(
    samples: Sequence[LatencySample],
    sequence_lengths: Sequence[int] | None = None,
) -> WorkloadDescriptor:
    """Describe the offered load over all samples (failed requests included)."""
    if len(samples) == 0:
        raise EmptySampleError("no samples provided")
    if sequence_lengths is not None and len(sequence_lengths) != len(samples):
        raise SequenceShapeError(
            f"{len(sequence_lengths)} sequence lengths for {len(samples)} samples"
        )

    batches = [s.batch_size for s in samples]
    batch_stats = RangeStats(
        min=float(min(batches)),
        mean=math.fsum(batches) / len(batches),
        max=float(max(batches)),
    )
    seq_stats = None
    total_items = sum(batches)
    if sequence_lengths is not None:
        lengths = [int(x) for x in sequence_lengths]
        if any(x < 0 for x in lengths):
            raise ValueError("sequence lengths must be non-negative")
        seq_stats = RangeStats(
            min=float(min(lengths)),
            mean=math.fsum(lengths) / len(lengths),
            max=float(max(lengths)),
        )
        total_items = sum(lengths)
    return WorkloadDescriptor(
        batch_size_stats=batch_stats,
        total_requests=len(samples),
        total_items=total_items,
        sequence_length_stats=seq_stats,
    )
