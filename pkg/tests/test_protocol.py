from __future__ import annotations

import socket
import statistics
import subprocess
import sys
import time

import pytest

from inferbench.protocol import (
    HandshakeError,
    InferRequest,
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

from conftest import fake_runner_cmd


def stdio(*extra: str, timeout: float = 10.0) -> StdioTransport:
    return StdioTransport(command=fake_runner_cmd(*extra), connect_timeout_s=timeout)


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def start_tcp_runner(*extra: str) -> tuple[subprocess.Popen, int]:
    port = free_port()
    proc = subprocess.Popen(list(fake_runner_cmd("--tcp", str(port), *extra)))
    deadline = time.monotonic() + 10.0
    while time.monotonic() < deadline:
        try:
            with socket.create_connection(("127.0.0.1", port), timeout=0.2):
                pass
            # probe connection consumed the single accept; restart the runner
            proc.wait(timeout=5.0)
            proc = subprocess.Popen(list(fake_runner_cmd("--tcp", str(port), *extra)))
            time.sleep(0.2)
            return proc, port
        except OSError:
            time.sleep(0.05)
    raise RuntimeError("fake TCP runner did not come up")


class TestOpenSession:
    def test_happy_path_handshake(self):
        session = open_session(stdio("--model", "demo-net", "--precision", "INT8"))
        try:
            hs = session.handshake
            assert hs.protocol_version == 1
            assert hs.model_name == "demo-net"
            assert hs.precision == "INT8"
            assert hs.device.interconnect == "PCIe"
            assert session.state == "ready"
        finally:
            session.close()

    def test_version_gate_names_both_versions(self):
        with pytest.raises(HandshakeError) as excinfo:
            open_session(stdio("--protocol-version", "2"))
        message = str(excinfo.value)
        assert "2" in message and "1" in message

    def test_malformed_hello_cites_line_one(self):
        with pytest.raises(ProtocolParseError) as excinfo:
            open_session(stdio("--malformed-hello"))
        assert excinfo.value.line_number == 1
        assert "line 1" in str(excinfo.value)

    def test_no_hello_is_a_handshake_error(self):
        with pytest.raises(HandshakeError):
            open_session(stdio("--no-hello"))

    def test_connect_timeout(self):
        with pytest.raises(HandshakeError, match="timed out"):
            open_session(stdio("--hello-delay-s", "5", timeout=0.3))

    def test_spawn_failure(self):
        with pytest.raises(TransportError):
            open_session(StdioTransport(command=("/nonexistent/runner",)))


class TestInfer:
    def test_basic_round_trip(self):
        session = open_session(stdio())
        try:
            response = session.infer(InferRequest(id=session.next_id(), batch_size=100))
            assert response.ok
            assert response.items_processed == 100
            assert response.runner_start_ns is not None
        finally:
            session.close()

    def test_out_of_order_responses_matched_by_id(self):
        session = open_session(stdio("--reorder-window", "2", "--delay-ms", "5"))
        try:
            first = session.submit(InferRequest(id=session.next_id(), batch_size=3))
            second = session.submit(InferRequest(id=session.next_id(), batch_size=9))
            assert first.wait(5.0).items_processed == 3
            assert second.wait(5.0).items_processed == 9
        finally:
            session.close()

    def test_request_after_close_rejected(self):
        session = open_session(stdio())
        session.close()
        with pytest.raises(SessionClosedError):
            session.infer(InferRequest(id=1, batch_size=1))

    def test_duplicate_in_flight_id_rejected(self):
        session = open_session(stdio("--delay-ms", "300"))
        try:
            session.submit(InferRequest(id=77, batch_size=1))
            with pytest.raises(ProtocolError, match="duplicate"):
                session.submit(InferRequest(id=77, batch_size=1))
        finally:
            session.close()

    def test_timeout_raises(self):
        session = open_session(stdio("--delay-ms", "500"))
        try:
            with pytest.raises(InferTimeoutError):
                session.infer(InferRequest(id=session.next_id(), batch_size=1), timeout_s=0.05)
        finally:
            session.close()

    def test_error_status_response(self):
        session = open_session(stdio("--error-on-batch", "13"))
        try:
            response = session.infer(InferRequest(id=session.next_id(), batch_size=13))
            assert not response.ok
            assert "injected" in response.message
        finally:
            session.close()

    def test_round_trip_overhead_budget(self):
        # median round trip against a no-op runner stays under the 1 ms
        # serialization overhead budget
        session = open_session(stdio())
        try:
            times = []
            for _ in range(60):
                start = time.monotonic_ns()
                session.infer(InferRequest(id=session.next_id(), batch_size=1))
                times.append((time.monotonic_ns() - start) / 1e6)
            assert statistics.median(times) < 1.0
        finally:
            session.close()

    def test_close_returns_exit_code_zero(self):
        session = open_session(stdio())
        assert session.close() == 0


class TestTcpTransport:
    def test_handshake_and_infer_over_tcp(self):
        proc, port = start_tcp_runner("--model", "tcp-model")
        try:
            session = open_session(TcpTransport(host="127.0.0.1", port=port))
            try:
                assert session.handshake.model_name == "tcp-model"
                response = session.infer(InferRequest(id=session.next_id(), batch_size=7))
                assert response.ok and response.items_processed == 7
            finally:
                session.close()
            assert proc.wait(timeout=5.0) == 0
        finally:
            if proc.poll() is None:
                proc.kill()

    def test_unreachable_endpoint(self):
        with pytest.raises(TransportError):
            open_session(TcpTransport(host="127.0.0.1", port=free_port(), connect_timeout_s=0.5))


class TestConformance:
    def test_conformant_runner_all_green(self):
        report = check_conformance(stdio("--delay-ms", "1"))
        assert report.passed, report.render()
        assert {c.name for c in report.checks} == {
            "handshake",
            "sequential-infer",
            "out-of-order",
            "error-response",
            "shutdown",
        }

    def test_wrong_ids_fail_matching_checks(self):
        report = check_conformance(stdio("--wrong-ids"))
        by_name = {c.name: c for c in report.checks}
        assert by_name["handshake"].passed
        assert not by_name["sequential-infer"].passed
        assert not report.passed

    def test_mid_run_exit_fails_shutdown_with_status(self):
        report = check_conformance(stdio("--exit-after", "2"))
        by_name = {c.name: c for c in report.checks}
        assert not report.passed
        assert not by_name["shutdown"].passed
        assert "1" in by_name["shutdown"].detail

    def test_render_has_verdict_per_check(self):
        report = check_conformance(stdio())
        text = report.render()
        assert text.count("PASS") == 5
        assert "conformance: all checks passed" in text
