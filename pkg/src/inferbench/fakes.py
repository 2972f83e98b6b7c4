"""In-process runner doubles with exact, known service times.

InProcessRunner models a single-server FIFO queue whose service time for a
batch of size B is base_delay_ms + per_item_delay_ms * B, optionally with
seeded uniform jitter. It exposes the same session surface as a real
RunnerSession, so the orchestrator and metrics pipeline can be exercised
end to end without spawning a child process, and closed-form oracles stay
available: per-item latency (c + m*B)/B, throughput B/(c + m*B).

Unlike a transport session (which can only stamp actual_start at message
send), the in-process queue is observable, so actual_start is stamped when
the server starts servicing the request: service-time is then the pure
model time and response-time adds the queue wait.
"""

from __future__ import annotations

import queue
import random
import threading
from dataclasses import dataclass

from ._clock import DEFAULT_CLOCK, Clock, sleep_until
from .protocol import (
    DeviceAnnotations,
    Handshake,
    InferRequest,
    InferResponse,
    PendingCall,
    SessionClosedError,
)

_SENTINEL = object()


def default_handshake(
    item_kind: str = "sample",
    model_name: str = "synthetic-model",
    platform: str = "in-process",
    precision: str = "FP16",
) -> Handshake:
    return Handshake(
        protocol_version=1,
        model_name=model_name,
        platform=platform,
        precision=precision,
        item_kind=item_kind,
        device=DeviceAnnotations(
            device_name="host-cpu",
            interconnect="none",
            memory_type="DDR",
            power_management="",
        ),
    )


@dataclass
class InProcessRunner:
    """A queueing, deterministic-delay runner living inside the harness process."""

    base_delay_ms: float = 10.0
    per_item_delay_ms: float = 0.0
    jitter_ms: float = 0.0
    seed: int = 0
    handshake: Handshake = None  # type: ignore[assignment]
    tokens_per_request: int = 32
    fail_batch_sizes: frozenset[int] = frozenset()
    die_on_batch: int | None = None
    clock: Clock = DEFAULT_CLOCK

    def __post_init__(self) -> None:
        if self.base_delay_ms < 0 or self.per_item_delay_ms < 0:
            raise ValueError("delays must be non-negative")
        if self.handshake is None:
            self.handshake = default_handshake()
        self.state = "ready"
        self._rng = random.Random(self.seed)
        self._queue: queue.SimpleQueue = queue.SimpleQueue()
        self._id_lock = threading.Lock()
        self._next_id = 0
        self._in_flight = 0
        self.max_in_flight_seen = 0
        self._worker = threading.Thread(target=self._serve, daemon=True)
        self._worker.start()

    def service_time_ms(self, batch_size: int) -> float:
        return self.base_delay_ms + self.per_item_delay_ms * batch_size

    def next_id(self) -> int:
        with self._id_lock:
            self._next_id += 1
            return self._next_id

    def submit(self, request: InferRequest, on_done=None) -> PendingCall:
        if self.state != "ready":
            raise SessionClosedError(f"cannot infer in state {self.state!r}")
        call = PendingCall(request, on_done=on_done)
        with self._id_lock:
            self._in_flight += 1
            self.max_in_flight_seen = max(self.max_in_flight_seen, self._in_flight)
        call.actual_start_ns = self.clock()
        self._queue.put(call)
        return call

    def infer(self, request: InferRequest, timeout_s: float = 60.0) -> InferResponse:
        return self.submit(request).wait(timeout_s)

    def close(self) -> int | None:
        if self.state == "closed":
            return 0
        self.state = "closed"
        self._queue.put(_SENTINEL)
        self._worker.join(timeout=10.0)
        return 0

    def _serve(self) -> None:
        while True:
            item = self._queue.get()
            if item is _SENTINEL:
                self._drain(SessionClosedError("session closed"))
                return
            call: PendingCall = item
            request = call.request
            if self.die_on_batch is not None and request.batch_size >= self.die_on_batch:
                self.state = "closed"
                call._fail(SessionClosedError("runner disconnected mid-run"))
                self._drain(SessionClosedError("runner disconnected mid-run"))
                return
            service_ms = self.service_time_ms(request.batch_size)
            if self.jitter_ms > 0:
                service_ms += self._rng.uniform(-self.jitter_ms, self.jitter_ms)
                service_ms = max(0.0, service_ms)
            start_ns = self.clock()
            # service begins now; queue wait stays out of the service-time view
            call.actual_start_ns = start_ns
            end_target = start_ns + int(service_ms * 1e6)
            sleep_until(end_target, self.clock)
            if request.batch_size in self.fail_batch_sizes:
                response = InferResponse(
                    id=request.id, status="error", message="injected failure"
                )
            else:
                if self.handshake.item_kind == "token":
                    items = self.tokens_per_request
                else:
                    items = request.batch_size
                response = InferResponse(
                    id=request.id,
                    status="ok",
                    items_processed=items,
                    runner_start_ns=start_ns,
                    runner_end_ns=self.clock(),
                )
            call._complete(response, self.clock())
            with self._id_lock:
                self._in_flight -= 1

    def _drain(self, error: BaseException) -> None:
        while True:
            try:
                item = self._queue.get_nowait()
            except queue.Empty:
                return
            if item is not _SENTINEL:
                item._fail(error)
