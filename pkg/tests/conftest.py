from __future__ import annotations

import sys
from pathlib import Path

import pytest

from inferbench.metrics import LatencySample

TESTS_DIR = Path(__file__).parent
FAKE_RUNNER = TESTS_DIR / "fake_runner.py"


def fake_runner_cmd(*extra: str) -> tuple[str, ...]:
    return (sys.executable, str(FAKE_RUNNER), *extra)


def make_sample(
    request_id: int = 1,
    intended_ms: float = 0.0,
    actual_ms: float | None = None,
    duration_ms: float = 10.0,
    batch_size: int = 1,
    outcome: str = "success",
) -> LatencySample:
    """Build a sample from millisecond offsets on a zero-based clock."""
    intended = int(intended_ms * 1e6)
    actual = intended if actual_ms is None else int(actual_ms * 1e6)
    return LatencySample(
        request_id=request_id,
        intended_start_ns=intended,
        actual_start_ns=actual,
        end_ns=actual + int(duration_ms * 1e6),
        batch_size=batch_size,
        outcome=outcome,
    )


def pytest_runtest_logreport(report):
    """Print one verdict line per acceptance criterion as it completes."""
    if report.when != "call":
        return
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_criterion"):
        return
    verdict = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
    print(f"\n[acceptance] {name}: {verdict}", flush=True)
