"""Open-loop, closed-loop, and static-batch load generation.

Open-loop arrivals form a Poisson process: i.i.d. exponential
inter-arrivals drawn by inverse CDF from a seeded Mersenne-Twister PRNG,
so a schedule is a pure function of (rate, duration, seed) and never
depends on how fast the runner answers. Requests are timestamped at their
scheduled arrival (intended_start) as well as at send (actual_start), which
keeps queueing delay in the measured response times.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass, replace

from ._clock import DEFAULT_CLOCK, Clock, sleep_until
from .energy import CarbonFactors, PowerTrace
from .metrics import ERROR, SUCCESS, LatencySample
from .protocol import (
    Handshake,
    InferRequest,
    InferTimeoutError,
    PendingCall,
    SessionClosedError,
    SessionLike,
)
from .sampling import PowerSourceConfig, start_sampling, stop_sampling

#: PRNG behind generate_arrivals, recorded in every report.
ARRIVAL_PRNG = "mt19937"

DEFAULT_WARMUP_ITERATIONS = 10
DEFAULT_REQUEST_TIMEOUT_S = 60.0
DEFAULT_MAX_IN_FLIGHT = 1024


class EmptyRunError(RuntimeError):
    """The run produced no measured samples (e.g. an empty open-loop schedule)."""


class PartialRunError(RuntimeError):
    """The runner disconnected mid-run; carries the completed samples."""

    def __init__(self, message: str, samples: tuple[LatencySample, ...]):
        super().__init__(message)
        self.samples = samples


@dataclass(frozen=True)
class OpenLoopPoisson:
    """Arrivals scheduled independently of responses (queueing stays visible)."""

    rate_rps: float
    duration_s: float
    batch_size: int = 1
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.rate_rps <= 0:
            raise ValueError(f"rate_rps must be positive, got {self.rate_rps}")
        if self.duration_s <= 0:
            raise ValueError(f"duration_s must be positive, got {self.duration_s}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")

    @property
    def mode(self) -> str:
        return "open-loop-poisson"


@dataclass(frozen=True)
class ClosedLoop:
    """Each worker issues the next request only when the previous completes."""

    concurrency: int
    iterations: int | None = None
    duration_s: float | None = None
    batch_size: int = 1

    def __post_init__(self) -> None:
        if self.concurrency < 1:
            raise ValueError(f"concurrency must be >= 1, got {self.concurrency}")
        if (self.iterations is None) == (self.duration_s is None):
            raise ValueError("set exactly one of iterations or duration_s")
        if self.iterations is not None and self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.duration_s is not None and self.duration_s <= 0:
            raise ValueError(f"duration_s must be positive, got {self.duration_s}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")

    @property
    def mode(self) -> str:
        return "closed-loop"


@dataclass(frozen=True)
class StaticBatch:
    """Fixed-size batches issued back to back, one at a time."""

    batch_size: int
    iterations: int

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")

    @property
    def mode(self) -> str:
        return "static-batch"


TrafficModel = OpenLoopPoisson | ClosedLoop | StaticBatch


def traffic_descriptor(traffic: TrafficModel) -> dict:
    """Flat dict identifying the traffic model, for reports and configs."""
    desc: dict = {"mode": traffic.mode}
    if isinstance(traffic, OpenLoopPoisson):
        desc.update(
            rate_rps=traffic.rate_rps,
            duration_s=traffic.duration_s,
            batch_size=traffic.batch_size,
            seed=traffic.seed,
            prng=ARRIVAL_PRNG,
        )
    elif isinstance(traffic, ClosedLoop):
        desc.update(
            concurrency=traffic.concurrency,
            iterations=traffic.iterations,
            duration_s=traffic.duration_s,
            batch_size=traffic.batch_size,
        )
    else:
        desc.update(batch_size=traffic.batch_size, iterations=traffic.iterations)
    return desc


@dataclass(frozen=True)
class RunPlan:
    """Everything one measured run needs, declared up front."""

    traffic: TrafficModel
    power_source: PowerSourceConfig
    carbon_factors: CarbonFactors
    warmup_iterations: int = DEFAULT_WARMUP_ITERATIONS
    batch_sweep: tuple[int, ...] | None = None
    seed: int = 0
    request_timeout_s: float = DEFAULT_REQUEST_TIMEOUT_S
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT
    output_dir: str | None = None

    def __post_init__(self) -> None:
        if self.warmup_iterations < 0:
            raise ValueError("warmup_iterations must be >= 0")
        if self.batch_sweep is not None:
            if len(self.batch_sweep) == 0:
                raise ValueError("batch_sweep must be non-empty when present")
            if any(b < 1 for b in self.batch_sweep):
                raise ValueError("batch_sweep entries must be >= 1")
            if any(a >= b for a, b in zip(self.batch_sweep, self.batch_sweep[1:])):
                raise ValueError("batch_sweep must be strictly increasing")
        if self.request_timeout_s <= 0:
            raise ValueError("request_timeout_s must be positive")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


@dataclass(frozen=True)
class RawRunRecord:
    """One run's raw material: samples, power trace, and identifying metadata."""

    traffic: dict
    handshake: Handshake
    samples: tuple[LatencySample, ...]
    trace: PowerTrace
    window_ns: tuple[int, int]
    warmup_iterations: int
    seed: int
    sequence_lengths: tuple[int, ...] | None = None

    @property
    def error_count(self) -> int:
        return sum(1 for s in self.samples if s.outcome == ERROR)


@dataclass(frozen=True)
class SweepResult:
    """One batch size's outcome inside a sweep; failures do not stop the sweep."""

    batch_size: int
    record: RawRunRecord | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.record is None


def generate_arrivals(rate_rps: float, duration_s: float, seed: int) -> list[int]:
    """Poisson arrival offsets (ns) over [0, duration), deterministic per seed.

    The schedule may be empty for short windows; that is a valid schedule.
    """
    if rate_rps <= 0 or duration_s <= 0:
        raise ValueError("rate_rps and duration_s must be positive")
    rng = random.Random(seed)
    offsets: list[int] = []
    t = rng.expovariate(rate_rps)
    while t < duration_s:
        offsets.append(int(t * 1e9))
        t += rng.expovariate(rate_rps)
    return offsets


def _sample_from_call(
    call: PendingCall, intended_ns: int, timeout_s: float, clock: Clock
) -> tuple[LatencySample, int]:
    """Wait out one call; timeouts and error responses become error samples.

    Returns the sample and the items_processed count (0 unless status ok).
    """
    try:
        response = call.wait(timeout_s)
    except InferTimeoutError:
        return (
            LatencySample(
                request_id=call.request.id,
                intended_start_ns=intended_ns,
                actual_start_ns=call.actual_start_ns,
                end_ns=clock(),
                batch_size=call.request.batch_size,
                outcome=ERROR,
            ),
            0,
        )
    return (
        LatencySample(
            request_id=call.request.id,
            intended_start_ns=intended_ns,
            actual_start_ns=call.actual_start_ns,
            end_ns=call.end_ns,
            batch_size=call.request.batch_size,
            outcome=SUCCESS if response.ok else ERROR,
        ),
        response.items_processed if response.ok else 0,
    )


def _run_warmup(session: SessionLike, batch_size: int, iterations: int, timeout_s: float) -> None:
    for _ in range(iterations):
        request = InferRequest(id=session.next_id(), batch_size=batch_size)
        try:
            session.infer(request, timeout_s=timeout_s)
        except InferTimeoutError:
            continue


def _run_sequential(
    session: SessionLike,
    batch_size: int,
    iterations: int,
    timeout_s: float,
    clock: Clock,
) -> list[tuple[LatencySample, int]]:
    out: list[tuple[LatencySample, int]] = []
    for _ in range(iterations):
        request = InferRequest(id=session.next_id(), batch_size=batch_size)
        try:
            call = session.submit(request)
            out.append(_sample_from_call(call, call.actual_start_ns, timeout_s, clock))
        except SessionClosedError as exc:
            raise PartialRunError(str(exc), tuple(s for s, _ in out))
    return out


def _run_closed_loop(
    session: SessionLike,
    traffic: ClosedLoop,
    timeout_s: float,
    clock: Clock,
) -> list[tuple[LatencySample, int]]:
    if traffic.concurrency == 1 and traffic.iterations is not None:
        return _run_sequential(session, traffic.batch_size, traffic.iterations, timeout_s, clock)

    quota_lock = threading.Lock()
    issued = 0
    deadline_ns = clock() + int((traffic.duration_s or 0) * 1e9)

    def take_slot() -> bool:
        nonlocal issued
        if traffic.iterations is not None:
            with quota_lock:
                if issued >= traffic.iterations:
                    return False
                issued += 1
                return True
        return clock() < deadline_ns

    results: list[list[tuple[LatencySample, int]]] = [[] for _ in range(traffic.concurrency)]
    failures: list[BaseException] = []

    def worker(slot: int) -> None:
        while take_slot():
            request = InferRequest(id=session.next_id(), batch_size=traffic.batch_size)
            try:
                call = session.submit(request)
                results[slot].append(
                    _sample_from_call(call, call.actual_start_ns, timeout_s, clock)
                )
            except SessionClosedError as exc:
                failures.append(exc)
                return

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(traffic.concurrency)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    merged = [item for per_worker in results for item in per_worker]
    merged.sort(key=lambda pair: pair[0].actual_start_ns)
    if failures and not merged:
        raise failures[0]
    if failures:
        raise PartialRunError(str(failures[0]), tuple(s for s, _ in merged))
    return merged


def _run_open_loop(
    session: SessionLike,
    traffic: OpenLoopPoisson,
    seed: int,
    timeout_s: float,
    max_in_flight: int,
    clock: Clock,
) -> list[tuple[LatencySample, int]]:
    effective_seed = traffic.seed if traffic.seed is not None else seed
    offsets = generate_arrivals(traffic.rate_rps, traffic.duration_s, effective_seed)
    if not offsets:
        return []

    in_flight = threading.Semaphore(max_in_flight)
    epoch_ns = clock()
    issued: list[tuple[int, PendingCall]] = []
    send_failure: BaseException | None = None

    for offset in offsets:
        intended_ns = epoch_ns + offset
        sleep_until(intended_ns, clock)
        in_flight.acquire()
        request = InferRequest(id=session.next_id(), batch_size=traffic.batch_size)
        try:
            call = session.submit(request, on_done=in_flight.release)
        except SessionClosedError as exc:
            send_failure = exc
            break
        issued.append((intended_ns, call))

    out = []
    disconnected = False
    for intended_ns, call in issued:
        try:
            out.append(_sample_from_call(call, intended_ns, timeout_s, clock))
        except SessionClosedError:
            disconnected = True
            break
    if send_failure is not None or disconnected:
        raise PartialRunError(
            "runner disconnected mid-run", tuple(s for s, _ in out)
        )
    return out


def execute_run(
    plan: RunPlan,
    session: SessionLike,
    traffic: TrafficModel | None = None,
    clock: Clock = DEFAULT_CLOCK,
) -> RawRunRecord:
    """Warm up, sample power concurrently, drive the traffic, and seal a record.

    Warmup requests are issued and discarded before measurement; power
    sampling starts before the first measured request and stops after the
    last response, and the energy window is exactly (first measured
    intended_start, last measured end). A runner disconnect raises
    PartialRunError carrying the completed samples; request timeouts mark
    individual samples as errors instead of aborting.
    """
    traffic = traffic if traffic is not None else plan.traffic
    if isinstance(traffic, (StaticBatch, OpenLoopPoisson, ClosedLoop)):
        warmup_batch = traffic.batch_size
    else:  # pragma: no cover - exhaustive above
        raise TypeError(f"unknown traffic model {traffic!r}")

    sampler = start_sampling(plan.power_source, clock)
    try:
        _run_warmup(session, warmup_batch, plan.warmup_iterations, plan.request_timeout_s)
        if isinstance(traffic, StaticBatch):
            timed = _run_sequential(
                session, traffic.batch_size, traffic.iterations, plan.request_timeout_s, clock
            )
        elif isinstance(traffic, ClosedLoop):
            timed = _run_closed_loop(session, traffic, plan.request_timeout_s, clock)
        else:
            timed = _run_open_loop(
                session, traffic, plan.seed, plan.request_timeout_s, plan.max_in_flight, clock
            )
    finally:
        trace = stop_sampling(sampler)

    if not timed:
        raise EmptyRunError(
            "run produced no measured samples (open-loop schedule may be empty)"
        )

    samples = tuple(s for s, _ in timed)
    window = (
        min(s.intended_start_ns for s in samples),
        max(s.end_ns for s in samples),
    )
    sequence_lengths = None
    if session.handshake.item_kind == "token":
        sequence_lengths = tuple(items for _, items in timed)
    return RawRunRecord(
        traffic=traffic_descriptor(traffic),
        handshake=session.handshake,
        samples=samples,
        trace=trace,
        window_ns=window,
        warmup_iterations=plan.warmup_iterations,
        seed=plan.seed,
        sequence_lengths=sequence_lengths,
    )


def _with_batch_size(traffic: TrafficModel, batch_size: int) -> TrafficModel:
    return replace(traffic, batch_size=batch_size)


def run_batch_sweep(
    plan: RunPlan,
    session: SessionLike,
    clock: Clock = DEFAULT_CLOCK,
) -> list[SweepResult]:
    """One run per batch size, same traffic otherwise; failures are isolated."""
    if not plan.batch_sweep:
        raise ValueError("plan has no batch_sweep")
    results: list[SweepResult] = []
    for batch_size in plan.batch_sweep:
        traffic = _with_batch_size(plan.traffic, batch_size)
        try:
            record = execute_run(plan, session, traffic=traffic, clock=clock)
            results.append(SweepResult(batch_size=batch_size, record=record))
        except Exception as exc:  # noqa: BLE001 - sweep isolates per-batch failures
            results.append(SweepResult(batch_size=batch_size, error=f"{type(exc).__name__}: {exc}"))
    return results
