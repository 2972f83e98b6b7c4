"""Harness side of the newline-delimited JSON runner protocol (v1).

A runner is any external process, in any language, that speaks this
protocol over its stdio pipes or a TCP stream: one JSON object per line,
UTF-8, LF. The runner sends ``hello`` as its first line; the harness
answers ``hello_ack`` and may then issue ``infer`` requests until it sends
``shutdown``, on which the runner exits 0.

    hello      runner->harness   {"type":"hello","protocol_version":1,
                                  "model_name":...,"platform":...,
                                  "precision":"FP16","item_kind":"sample",
                                  "device":{"device_name":...,"interconnect":"PCIe",
                                            "memory_type":"GDDR","power_management":...},
                                  "accuracy":{"metric_name":...,"value":...}?}
    hello_ack  harness->runner   {"type":"hello_ack","protocol_version":1}
    infer      harness->runner   {"type":"infer","id":1,"batch_size":100,
                                  "sequence_length":...?,"payload_ref":...?}
    result     runner->harness   {"type":"result","id":1,"status":"ok",
                                  "items_processed":100,
                                  "runner_start_ns":...?,"runner_end_ns":...?}
                           or    {"type":"result","id":1,"status":"error","message":...}
    shutdown   harness->runner   {"type":"shutdown"}

A runner that receives an unparseable line should answer with an error
result (id -1 when the id is unknown) and keep the session alive.

The harness stamps actual_start at message send and end at response
receipt on its own monotonic clock; runner-reported timestamps are
informational. Responses may arrive out of order and are matched to
waiting callers by id.
"""

from __future__ import annotations

import json
import socket
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import Callable, Protocol

from ._clock import DEFAULT_CLOCK, Clock

PROTOCOL_VERSION = 1

PRECISIONS = ("FP32", "FP16", "INT8")
ITEM_KINDS = ("sample", "token", "request")
INTERCONNECTS = ("NVLink", "PCIe", "other", "none")
MEMORY_TYPES = ("HBM", "GDDR", "DDR", "other")

DEFAULT_CONNECT_TIMEOUT_S = 10.0
DEFAULT_INFER_TIMEOUT_S = 60.0


class TransportError(RuntimeError):
    """The runner process or connection could not be established."""


class HandshakeError(RuntimeError):
    """The runner's hello was rejected."""


class ProtocolParseError(RuntimeError):
    """A protocol line could not be parsed."""

    def __init__(self, line_number: int, line: str, message: str):
        super().__init__(f"line {line_number}: {message} (got {line!r})")
        self.line_number = line_number
        self.line = line


class ProtocolError(RuntimeError):
    """The protocol contract was violated (e.g. duplicate in-flight id)."""


class SessionClosedError(RuntimeError):
    """The session is closed or the runner disconnected."""


class InferTimeoutError(RuntimeError):
    """No response arrived within the request timeout."""


@dataclass(frozen=True)
class DeviceAnnotations:
    """Hardware context carried on every report row.

    All fields are always present; use "other"/"none"/empty text rather
    than omission so rows stay comparable.
    """

    device_name: str
    interconnect: str
    memory_type: str
    power_management: str

    def __post_init__(self) -> None:
        if self.interconnect not in INTERCONNECTS:
            raise ValueError(f"interconnect must be one of {INTERCONNECTS}, got {self.interconnect!r}")
        if self.memory_type not in MEMORY_TYPES:
            raise ValueError(f"memory_type must be one of {MEMORY_TYPES}, got {self.memory_type!r}")


@dataclass(frozen=True)
class AccuracyMetadata:
    metric_name: str
    value: float


@dataclass(frozen=True)
class Handshake:
    """What a runner declares about itself; fully determines report labels."""

    protocol_version: int
    model_name: str
    platform: str
    precision: str
    item_kind: str
    device: DeviceAnnotations
    accuracy: AccuracyMetadata | None = None

    def __post_init__(self) -> None:
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {PRECISIONS}, got {self.precision!r}")
        if self.item_kind not in ITEM_KINDS:
            raise ValueError(f"item_kind must be one of {ITEM_KINDS}, got {self.item_kind!r}")


@dataclass(frozen=True)
class InferRequest:
    id: int
    batch_size: int
    sequence_length: int | None = None
    payload_ref: str | None = None

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")

    def to_wire(self) -> dict:
        msg: dict = {"type": "infer", "id": self.id, "batch_size": self.batch_size}
        if self.sequence_length is not None:
            msg["sequence_length"] = self.sequence_length
        if self.payload_ref is not None:
            msg["payload_ref"] = self.payload_ref
        return msg


@dataclass(frozen=True)
class InferResponse:
    id: int
    status: str
    items_processed: int = 0
    runner_start_ns: int | None = None
    runner_end_ns: int | None = None
    message: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def parse_handshake(obj: dict) -> Handshake:
    """Validate a hello message; raises HandshakeError on any defect."""
    if obj.get("type") != "hello":
        raise HandshakeError(f"first message must have type 'hello', got {obj.get('type')!r}")
    version = obj.get("protocol_version")
    if version != PROTOCOL_VERSION:
        raise HandshakeError(
            f"runner declared protocol_version {version}, harness supports {PROTOCOL_VERSION}"
        )
    device_obj = obj.get("device")
    if not isinstance(device_obj, dict):
        raise HandshakeError("hello is missing the device annotations object")
    try:
        device = DeviceAnnotations(
            device_name=str(device_obj["device_name"]),
            interconnect=str(device_obj["interconnect"]),
            memory_type=str(device_obj["memory_type"]),
            power_management=str(device_obj["power_management"]),
        )
    except (KeyError, ValueError) as exc:
        raise HandshakeError(f"invalid device annotations: {exc}") from None
    accuracy = None
    if obj.get("accuracy") is not None:
        acc = obj["accuracy"]
        try:
            accuracy = AccuracyMetadata(metric_name=str(acc["metric_name"]), value=float(acc["value"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise HandshakeError(f"invalid accuracy metadata: {exc}") from None
    try:
        return Handshake(
            protocol_version=int(version),
            model_name=str(obj["model_name"]),
            platform=str(obj["platform"]),
            precision=str(obj["precision"]),
            item_kind=str(obj["item_kind"]),
            device=device,
            accuracy=accuracy,
        )
    except (KeyError, ValueError) as exc:
        raise HandshakeError(f"invalid hello: {exc}") from None


def parse_response(obj: dict) -> InferResponse:
    status = obj.get("status")
    if status not in ("ok", "error"):
        raise ValueError(f"result status must be 'ok' or 'error', got {status!r}")
    return InferResponse(
        id=int(obj["id"]),
        status=status,
        items_processed=int(obj.get("items_processed", 0)),
        runner_start_ns=obj.get("runner_start_ns"),
        runner_end_ns=obj.get("runner_end_ns"),
        message=obj.get("message"),
    )


class PendingCall:
    """An in-flight request, completed by the session's reader thread."""

    def __init__(self, request: InferRequest, on_done: Callable[[], None] | None = None):
        self.request = request
        self.actual_start_ns: int = 0
        self.end_ns: int = 0
        self._event = threading.Event()
        self._response: InferResponse | None = None
        self._error: BaseException | None = None
        self._on_done = on_done

    def _complete(self, response: InferResponse, end_ns: int) -> None:
        self._response = response
        self.end_ns = end_ns
        self._event.set()
        if self._on_done is not None:
            self._on_done()

    def _fail(self, error: BaseException) -> None:
        if self._event.is_set():
            return
        self._error = error
        self._event.set()
        if self._on_done is not None:
            self._on_done()

    @property
    def done(self) -> bool:
        return self._event.is_set()

    def wait(self, timeout_s: float | None = None) -> InferResponse:
        if not self._event.wait(timeout_s):
            raise InferTimeoutError(
                f"request {self.request.id} timed out after {timeout_s} s"
            )
        if self._error is not None:
            raise self._error
        assert self._response is not None
        return self._response


@dataclass(frozen=True)
class StdioTransport:
    """Spawn the runner as a child and talk over its stdin/stdout."""

    command: tuple[str, ...]
    connect_timeout_s: float = DEFAULT_CONNECT_TIMEOUT_S


@dataclass(frozen=True)
class TcpTransport:
    """Connect to an already-running runner over TCP."""

    host: str
    port: int
    connect_timeout_s: float = DEFAULT_CONNECT_TIMEOUT_S


TransportConfig = StdioTransport | TcpTransport


class SessionLike(Protocol):
    """What loadgen needs from a runner session (real or in-process)."""

    @property
    def handshake(self) -> Handshake: ...

    def next_id(self) -> int: ...

    def submit(self, request: InferRequest) -> PendingCall: ...

    def infer(self, request: InferRequest, timeout_s: float = DEFAULT_INFER_TIMEOUT_S) -> InferResponse: ...

    def close(self) -> int | None: ...


class RunnerSession:
    """One transport, one outbound writer lock, responses demuxed by id.

    Construct via open_session(). Not shareable across runs; close() is
    idempotent and returns the child's exit status for stdio transports.
    """

    def __init__(
        self,
        transport: TransportConfig,
        clock: Clock = DEFAULT_CLOCK,
        record_wire: bool = False,
    ):
        self._transport = transport
        self._clock = clock
        self.state = "connecting"
        self._proc: subprocess.Popen | None = None
        self._sock: socket.socket | None = None
        self._reader_file = None
        self._writer_file = None
        self._write_lock = threading.Lock()
        self._pending_lock = threading.Lock()
        self._pending: dict[int, PendingCall] = {}
        self._id_lock = threading.Lock()
        self._next_id = 0
        self._handshake: Handshake | None = None
        self._handshake_error: BaseException | None = None
        self._ready = threading.Event()
        self._closing = False
        self._close_done = False
        self._exit_code: int | None = None
        self.orphan_responses: list[InferResponse] = []
        self.incidents: list[str] = []
        self.transcript: list[str] | None = [] if record_wire else None

        if isinstance(transport, StdioTransport):
            try:
                self._proc = subprocess.Popen(
                    list(transport.command),
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    encoding="utf-8",
                    bufsize=1,
                )
            except OSError as exc:
                raise TransportError(f"could not spawn runner {transport.command}: {exc}")
            self._reader_file = self._proc.stdout
            self._writer_file = self._proc.stdin
        else:
            try:
                self._sock = socket.create_connection(
                    (transport.host, transport.port), timeout=transport.connect_timeout_s
                )
            except OSError as exc:
                raise TransportError(
                    f"could not connect to runner at {transport.host}:{transport.port}: {exc}"
                )
            self._sock.settimeout(None)
            self._reader_file = self._sock.makefile("r", encoding="utf-8", newline="\n")
            self._writer_file = self._sock.makefile("w", encoding="utf-8", newline="\n")

        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    # -- outbound -----------------------------------------------------------

    def _send(self, obj: dict) -> int:
        """Serialize, then stamp the send time, then write. Returns the stamp."""
        line = json.dumps(obj, separators=(",", ":"))
        with self._write_lock:
            if self.state == "closed":
                raise SessionClosedError("session is closed")
            stamp = self._clock()
            try:
                self._writer_file.write(line + "\n")
                self._writer_file.flush()
            except (OSError, ValueError) as exc:
                raise SessionClosedError(f"runner transport closed: {exc}") from None
        if self.transcript is not None:
            self.transcript.append(f"> {line}")
        return stamp

    def send_raw(self, line: str) -> None:
        """Write a raw line verbatim (conformance fault injection)."""
        with self._write_lock:
            self._writer_file.write(line + "\n")
            self._writer_file.flush()
        if self.transcript is not None:
            self.transcript.append(f"> {line}")

    # -- inbound ------------------------------------------------------------

    def _read_loop(self) -> None:
        line_number = 0
        try:
            for raw in self._reader_file:
                line_number += 1
                end_ns = self._clock()
                line = raw.rstrip("\n")
                if self.transcript is not None:
                    self.transcript.append(f"< {line}")
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    if line_number == 1:
                        self._handshake_error = ProtocolParseError(1, line, f"invalid JSON: {exc}")
                        self._ready.set()
                        return
                    self.incidents.append(f"line {line_number}: invalid JSON: {line!r}")
                    continue
                if line_number == 1:
                    try:
                        self._handshake = parse_handshake(obj)
                    except HandshakeError as exc:
                        self._handshake_error = exc
                    self._ready.set()
                    continue
                if obj.get("type") != "result":
                    self.incidents.append(f"line {line_number}: unexpected message type {obj.get('type')!r}")
                    continue
                try:
                    response = parse_response(obj)
                except (KeyError, TypeError, ValueError) as exc:
                    self.incidents.append(f"line {line_number}: bad result: {exc}")
                    continue
                with self._pending_lock:
                    pending = self._pending.pop(response.id, None)
                if pending is None:
                    self.orphan_responses.append(response)
                else:
                    pending._complete(response, end_ns)
        except (OSError, ValueError):
            pass
        finally:
            if not self._ready.is_set():
                if self._handshake_error is None:
                    self._handshake_error = HandshakeError(
                        "runner closed the connection before sending hello"
                    )
                self._ready.set()
            self._fail_pending(SessionClosedError("runner disconnected mid-run"))
            if not self._closing:
                self.state = "closed"

    def _fail_pending(self, error: BaseException) -> None:
        with self._pending_lock:
            pending = list(self._pending.values())
            self._pending.clear()
        for call in pending:
            call._fail(error)

    # -- session lifecycle ----------------------------------------------------

    def _complete_handshake(self, timeout_s: float) -> None:
        if not self._ready.wait(timeout_s):
            self.close()
            raise HandshakeError(f"timed out after {timeout_s} s waiting for the runner's hello")
        if self._handshake_error is not None:
            error = self._handshake_error
            self.close()
            raise error
        self._send({"type": "hello_ack", "protocol_version": PROTOCOL_VERSION})
        self.state = "ready"

    @property
    def handshake(self) -> Handshake:
        if self._handshake is None:
            raise ProtocolError("handshake not completed")
        return self._handshake

    def next_id(self) -> int:
        with self._id_lock:
            self._next_id += 1
            return self._next_id

    def submit(self, request: InferRequest, on_done: Callable[[], None] | None = None) -> PendingCall:
        """Send without waiting; the reader completes the returned call."""
        if self.state != "ready":
            raise SessionClosedError(f"cannot infer in state {self.state!r}")
        call = PendingCall(request, on_done=on_done)
        with self._pending_lock:
            if request.id in self._pending:
                raise ProtocolError(f"duplicate in-flight request id {request.id}")
            self._pending[request.id] = call
        try:
            call.actual_start_ns = self._send(request.to_wire())
        except SessionClosedError:
            with self._pending_lock:
                self._pending.pop(request.id, None)
            raise
        return call

    def infer(
        self, request: InferRequest, timeout_s: float = DEFAULT_INFER_TIMEOUT_S
    ) -> InferResponse:
        return self.submit(request).wait(timeout_s)

    def close(self, timeout_s: float = 5.0) -> int | None:
        """Send shutdown, release the transport, and reap the child.

        Idempotent; returns the child's exit status for stdio transports.
        Runners that never completed a handshake are terminated rather than
        asked to shut down.
        """
        if self._close_done:
            return self._exit_code
        self._close_done = True
        handshook = self._handshake is not None
        self._closing = True
        self.state = "closed"
        if handshook:
            try:
                with self._write_lock:
                    self._writer_file.write(json.dumps({"type": "shutdown"}) + "\n")
                    self._writer_file.flush()
                if self.transcript is not None:
                    self.transcript.append('> {"type": "shutdown"}')
            except (OSError, ValueError, BrokenPipeError):
                pass
        if self._proc is not None:
            if not handshook:
                self._proc.terminate()
            try:
                self._exit_code = self._proc.wait(timeout=timeout_s)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._exit_code = self._proc.wait()
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        if self._sock is not None:
            try:
                self._sock.shutdown(socket.SHUT_WR)
            except OSError:
                pass
        self._reader.join(timeout=timeout_s)
        if self._sock is not None:
            self._sock.close()
        self._fail_pending(SessionClosedError("session closed"))
        return self._exit_code

    @property
    def exit_code(self) -> int | None:
        return self._exit_code


def open_session(
    transport: TransportConfig,
    clock: Clock = DEFAULT_CLOCK,
    record_wire: bool = False,
) -> RunnerSession:
    """Spawn/connect, validate the handshake, ack it, and return a ready session."""
    session = RunnerSession(transport, clock=clock, record_wire=record_wire)
    session._complete_handshake(transport.connect_timeout_s)
    return session


# ---------------------------------------------------------------------------
# Conformance checking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConformanceCheck:
    name: str
    passed: bool
    detail: str
    transcript: tuple[str, ...] = ()


@dataclass(frozen=True)
class ConformanceReport:
    checks: tuple[ConformanceCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def render(self, include_transcripts: bool = False) -> str:
        lines = []
        for check in self.checks:
            verdict = "PASS" if check.passed else "FAIL"
            lines.append(f"{verdict}  {check.name}: {check.detail}")
            if include_transcripts and check.transcript:
                lines.extend(f"       {t}" for t in check.transcript)
        overall = "all checks passed" if self.passed else "some checks FAILED"
        lines.append(f"conformance: {overall}")
        return "\n".join(lines)


CONFORMANCE_CHECKS = ("handshake", "sequential-infer", "out-of-order", "error-response", "shutdown")

# per-check response budget; a conformant local runner answers in microseconds
CONFORMANCE_TIMEOUT_S = 2.0


def check_conformance(transport: TransportConfig) -> ConformanceReport:
    """Exercise a runner against the protocol contract.

    One session is used for all checks, in order: handshake, sequential
    infer, out-of-order (concurrent) matching, error response to a
    malformed line, clean shutdown. Failures are report content, not
    exceptions.
    """
    checks: list[ConformanceCheck] = []

    def snapshot(session: RunnerSession | None, start: int) -> tuple[str, ...]:
        if session is None or session.transcript is None:
            return ()
        return tuple(session.transcript[start:])

    session: RunnerSession | None = None
    mark = 0
    try:
        session = open_session(transport, record_wire=True)
    except (TransportError, HandshakeError, ProtocolParseError, SessionClosedError) as exc:
        checks.append(ConformanceCheck("handshake", False, str(exc), snapshot(session, 0)))
        for name in CONFORMANCE_CHECKS[1:]:
            checks.append(ConformanceCheck(name, False, "not run: handshake failed"))
        return ConformanceReport(tuple(checks))

    hs = session.handshake
    checks.append(
        ConformanceCheck(
            "handshake",
            True,
            f"v{hs.protocol_version} {hs.model_name} / {hs.platform} / {hs.precision}",
            snapshot(session, mark),
        )
    )

    # sequential infer: ids and item counts must match one for one
    mark = len(session.transcript)
    try:
        problems = []
        for batch in (1, 2, 3):
            request = InferRequest(id=session.next_id(), batch_size=batch)
            try:
                response = session.infer(request, timeout_s=CONFORMANCE_TIMEOUT_S)
            except InferTimeoutError:
                problems.append(f"id {request.id} got no matching response")
                break
            if response.id != request.id:
                problems.append(f"id {request.id} answered as {response.id}")
            elif not response.ok:
                problems.append(f"id {request.id} failed: {response.message}")
            elif response.items_processed != batch:
                problems.append(
                    f"id {request.id} processed {response.items_processed}, expected {batch}"
                )
        checks.append(
            ConformanceCheck(
                "sequential-infer",
                not problems,
                "; ".join(problems) or "3 requests answered in order",
                snapshot(session, mark),
            )
        )
    except Exception as exc:  # noqa: BLE001 - failures are report content
        checks.append(ConformanceCheck("sequential-infer", False, str(exc), snapshot(session, mark)))

    # out-of-order: concurrent requests with distinct batch sizes; each
    # response must carry its own request's item count whatever the arrival order
    mark = len(session.transcript)
    try:
        calls = []
        for batch in (4, 5, 6, 7):
            calls.append(session.submit(InferRequest(id=session.next_id(), batch_size=batch)))
        problems = []
        deadline = time.monotonic() + CONFORMANCE_TIMEOUT_S
        for call in calls:
            try:
                response = call.wait(max(0.05, deadline - time.monotonic()))
            except InferTimeoutError:
                problems.append(f"id {call.request.id} got no matching response")
                continue
            if not response.ok:
                problems.append(f"id {call.request.id} failed: {response.message}")
            elif response.items_processed != call.request.batch_size:
                problems.append(
                    f"id {call.request.id} processed {response.items_processed}, "
                    f"expected {call.request.batch_size}"
                )
        checks.append(
            ConformanceCheck(
                "out-of-order",
                not problems,
                "; ".join(problems) or "4 concurrent requests matched by id",
                snapshot(session, mark),
            )
        )
    except Exception as exc:  # noqa: BLE001
        checks.append(ConformanceCheck("out-of-order", False, str(exc), snapshot(session, mark)))

    # error response: a malformed line should elicit an error result and
    # leave the session serving
    mark = len(session.transcript)
    try:
        orphans_before = len(session.orphan_responses)
        session.send_raw('{"type":')
        request = InferRequest(id=session.next_id(), batch_size=1)
        response = session.infer(request, timeout_s=CONFORMANCE_TIMEOUT_S)
        error_seen = any(
            r.status == "error" for r in session.orphan_responses[orphans_before:]
        )
        problems = []
        if not response.ok:
            problems.append("valid request after malformed line was not served")
        if not error_seen:
            problems.append("no error result observed for the malformed line")
        checks.append(
            ConformanceCheck(
                "error-response",
                not problems,
                "; ".join(problems) or "error result returned, session stayed alive",
                snapshot(session, mark),
            )
        )
    except Exception as exc:  # noqa: BLE001
        checks.append(ConformanceCheck("error-response", False, str(exc), snapshot(session, mark)))

    # clean shutdown
    mark = len(session.transcript)
    try:
        exit_code = session.close()
        if isinstance(transport, StdioTransport):
            passed = exit_code == 0
            detail = f"runner exited {exit_code}" + ("" if passed else ", expected 0")
        else:
            passed = True
            detail = "connection closed"
        checks.append(ConformanceCheck("shutdown", passed, detail, snapshot(session, mark)))
    except Exception as exc:  # noqa: BLE001
        checks.append(ConformanceCheck("shutdown", False, str(exc), snapshot(session, mark)))

    return ConformanceReport(tuple(checks))
