"""Shared monotonic-clock helpers."""

from __future__ import annotations

import time
from typing import Callable

Clock = Callable[[], int]

DEFAULT_CLOCK: Clock = time.monotonic_ns

# Sleep coarsely, then spin the last stretch: OS wakeups overshoot by
# ~0.1 ms, which matters when service times are themselves a few ms.
_SPIN_NS = 800_000


def sleep_until(target_ns: int, clock: Clock = DEFAULT_CLOCK) -> int:
    """Block until clock() >= target_ns; returns the clock value on exit."""
    while True:
        now = clock()
        remaining = target_ns - now
        if remaining <= 0:
            return now
        if remaining > _SPIN_NS:
            time.sleep((remaining - _SPIN_NS) / 1e9)
