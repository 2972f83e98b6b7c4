"""Power sources that record a PowerTrace alongside a benchmark run.

Three kinds: replayed CSV files, synthetic waveforms, and external sampler
commands (so real device counters can be wired in without binding the
harness to any vendor API). A session is single-writer: one background
thread appends samples until stop() seals the trace. Timestamps come from
the same monotonic clock as the latency samples, so both share a time base.
"""

from __future__ import annotations

import math
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from ._clock import DEFAULT_CLOCK, Clock
from .energy import PowerSample, PowerTrace, read_trace_csv

WAVEFORMS = ("constant", "ramp", "sinusoid")
SOURCE_KINDS = ("replay", "synthetic", "external-command")
EXTERNAL_MODES = ("per-tick", "stream")


class SamplerError(RuntimeError):
    """A power source failed while sampling."""


class SpawnError(SamplerError):
    """The external sampler command could not be started."""


@dataclass(frozen=True)
class SyntheticWaveform:
    """Deterministic power as a function of elapsed seconds."""

    shape: str
    watts: float = 0.0
    start_w: float = 0.0
    slope_w_per_s: float = 0.0
    mean_w: float = 0.0
    amplitude_w: float = 0.0
    period_s: float = 1.0

    def __post_init__(self) -> None:
        if self.shape not in WAVEFORMS:
            raise ValueError(f"unknown waveform {self.shape!r}")
        if self.shape == "constant" and self.watts < 0:
            raise ValueError("constant watts must be non-negative")
        if self.shape == "ramp" and self.start_w < 0:
            raise ValueError("ramp start_w must be non-negative")
        if self.shape == "sinusoid":
            if self.period_s <= 0:
                raise ValueError("sinusoid period must be positive")
            if not 0 <= self.amplitude_w <= self.mean_w:
                raise ValueError("sinusoid requires 0 <= amplitude <= mean to stay non-negative")

    @classmethod
    def constant(cls, watts: float) -> "SyntheticWaveform":
        return cls(shape="constant", watts=watts)

    @classmethod
    def ramp(cls, start_w: float, slope_w_per_s: float) -> "SyntheticWaveform":
        return cls(shape="ramp", start_w=start_w, slope_w_per_s=slope_w_per_s)

    @classmethod
    def sinusoid(cls, mean_w: float, amplitude_w: float, period_s: float) -> "SyntheticWaveform":
        return cls(shape="sinusoid", mean_w=mean_w, amplitude_w=amplitude_w, period_s=period_s)

    def power_at(self, elapsed_s: float) -> float:
        if self.shape == "constant":
            return self.watts
        if self.shape == "ramp":
            return max(0.0, self.start_w + self.slope_w_per_s * elapsed_s)
        return self.mean_w + self.amplitude_w * math.sin(2 * math.pi * elapsed_s / self.period_s)


@dataclass(frozen=True)
class PowerSourceConfig:
    """Exactly one of waveform, replay_path, or command, matching ``kind``."""

    kind: str
    interval_ms: float = 100.0
    waveform: SyntheticWaveform | None = None
    replay_path: str | None = None
    command: str | None = None
    command_mode: str = "per-tick"

    def __post_init__(self) -> None:
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"unknown power source kind {self.kind!r}")
        if self.interval_ms <= 0:
            raise ValueError(f"interval_ms must be positive, got {self.interval_ms}")
        if self.command_mode not in EXTERNAL_MODES:
            raise ValueError(f"unknown external command mode {self.command_mode!r}")
        populated = {
            "synthetic": self.waveform is not None,
            "replay": self.replay_path is not None,
            "external-command": self.command is not None,
        }
        if sum(populated.values()) != 1 or not populated[self.kind]:
            raise ValueError(
                f"exactly the {self.kind!r} parameter set must be populated, got {self}"
            )

    @classmethod
    def synthetic(cls, waveform: SyntheticWaveform, interval_ms: float = 100.0) -> "PowerSourceConfig":
        return cls(kind="synthetic", interval_ms=interval_ms, waveform=waveform)

    @classmethod
    def replay(cls, path: str | Path, interval_ms: float = 100.0) -> "PowerSourceConfig":
        return cls(kind="replay", interval_ms=interval_ms, replay_path=str(path))

    @classmethod
    def external(
        cls, command: str, mode: str = "per-tick", interval_ms: float = 100.0
    ) -> "PowerSourceConfig":
        return cls(kind="external-command", interval_ms=interval_ms, command=command, command_mode=mode)


class SamplingSession:
    """One power source, one writer thread, one sealed trace.

    Readers must not touch the sample list until stop() returns; stop() is
    idempotent and returns the same sealed PowerTrace on every call.
    """

    def __init__(self, config: PowerSourceConfig, clock: Clock = DEFAULT_CLOCK):
        self.config = config
        self._clock = clock
        self._samples: list[PowerSample] = []
        self._stop_event = threading.Event()
        self._thread: threading.Thread | None = None
        self._proc: subprocess.Popen | None = None
        self._trace: PowerTrace | None = None
        self._failure: str | None = None
        self._lock = threading.Lock()
        self.start_ns = clock()

        if config.kind == "replay":
            trace = read_trace_csv(config.replay_path)
            base = trace.samples[0].timestamp_ns
            self._samples = [
                PowerSample(timestamp_ns=self.start_ns + (s.timestamp_ns - base), power_w=s.power_w)
                for s in trace.samples
            ]
            self._source_id = trace.source_id
        elif config.kind == "synthetic":
            self._source_id = f"synthetic:{config.waveform.shape}"
            self._append(self.start_ns, config.waveform.power_at(0.0))
            self._thread = threading.Thread(target=self._run_synthetic, daemon=True)
            self._thread.start()
        else:
            self._source_id = "external-command"
            self._args = shlex.split(config.command)
            if config.command_mode == "per-tick":
                power = self._invoke_once()
                self._append(self._clock(), power)
                self._thread = threading.Thread(target=self._run_per_tick, daemon=True)
            else:
                try:
                    self._proc = subprocess.Popen(
                        self._args,
                        stdout=subprocess.PIPE,
                        stderr=subprocess.DEVNULL,
                        text=True,
                    )
                except OSError as exc:
                    raise SpawnError(f"could not start sampler command {config.command!r}: {exc}")
                self._thread = threading.Thread(target=self._run_stream, daemon=True)
            self._thread.start()

    # -- writer-side helpers ------------------------------------------------

    def _append(self, timestamp_ns: int, power_w: float) -> None:
        if self._samples and timestamp_ns <= self._samples[-1].timestamp_ns:
            timestamp_ns = self._samples[-1].timestamp_ns + 1
        self._samples.append(PowerSample(timestamp_ns=timestamp_ns, power_w=power_w))

    def _invoke_once(self) -> float:
        try:
            result = subprocess.run(
                self._args,
                capture_output=True,
                text=True,
                timeout=max(1.0, self.config.interval_ms / 1e3 * 10),
            )
        except OSError as exc:
            raise SpawnError(f"could not start sampler command {self.config.command!r}: {exc}")
        except subprocess.TimeoutExpired:
            raise SamplerError(f"sampler command {self.config.command!r} timed out")
        if result.returncode != 0:
            raise SamplerError(
                f"sampler command exited with status {result.returncode}: {result.stderr.strip()}"
            )
        try:
            return float(result.stdout.strip().splitlines()[0])
        except (IndexError, ValueError):
            raise SamplerError(
                f"sampler command printed unparseable power value: {result.stdout!r}"
            )

    def _run_synthetic(self) -> None:
        interval_s = self.config.interval_ms / 1e3
        deadline = time.monotonic() + interval_s
        while not self._stop_event.wait(max(0.0, deadline - time.monotonic())):
            now = self._clock()
            elapsed_s = (now - self.start_ns) / 1e9
            self._append(now, self.config.waveform.power_at(elapsed_s))
            deadline += interval_s
            if deadline < time.monotonic():
                # behind schedule: skip missed ticks rather than back-fill
                deadline = time.monotonic() + interval_s

    def _run_per_tick(self) -> None:
        interval_s = self.config.interval_ms / 1e3
        deadline = time.monotonic() + interval_s
        while not self._stop_event.wait(max(0.0, deadline - time.monotonic())):
            try:
                power = self._invoke_once()
            except SamplerError as exc:
                self._failure = str(exc)
                return
            self._append(self._clock(), power)
            deadline += interval_s
            if deadline < time.monotonic():
                deadline = time.monotonic() + interval_s

    def _run_stream(self) -> None:
        assert self._proc is not None and self._proc.stdout is not None
        for line in self._proc.stdout:
            if not line.strip():
                continue
            try:
                power = float(line.strip())
            except ValueError:
                self._failure = f"sampler command printed unparseable power value: {line!r}"
                return
            self._append(self._clock(), power)
        code = self._proc.wait()
        if code != 0 and not self._stop_event.is_set():
            self._failure = f"sampler command exited with status {code} mid-run"

    # -- sealing ------------------------------------------------------------

    def stop(self) -> PowerTrace:
        """Seal and return the trace; safe to call more than once."""
        with self._lock:
            if self._trace is not None:
                return self._trace
            self._stop_event.set()
            if self._thread is not None:
                self._thread.join(timeout=10.0)
            if self._proc is not None:
                self._proc.terminate()
                try:
                    self._proc.wait(timeout=5.0)
                except subprocess.TimeoutExpired:
                    self._proc.kill()
            if self._failure is not None:
                raise SamplerError(self._failure)

            stop_ns = self._clock()
            kind = self.config.kind
            if kind == "synthetic":
                elapsed_s = (stop_ns - self.start_ns) / 1e9
                self._append(stop_ns, self.config.waveform.power_at(elapsed_s))
            elif kind == "external-command" and self._samples:
                if self.config.command_mode == "per-tick":
                    try:
                        power = self._invoke_once()
                    except SamplerError:
                        power = self._samples[-1].power_w
                else:
                    power = self._samples[-1].power_w
                self._append(stop_ns, power)

            self._trace = PowerTrace(samples=tuple(self._samples), source_id=self._source_id)
            return self._trace


def start_sampling(config: PowerSourceConfig, clock: Clock = DEFAULT_CLOCK) -> SamplingSession:
    """Validate the config and start appending samples at ~interval_ms cadence."""
    return SamplingSession(config, clock)


def stop_sampling(session: SamplingSession) -> PowerTrace:
    """Seal the session; the final sample covers the stop instant."""
    return session.stop()
