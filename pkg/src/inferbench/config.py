"""Declarative JSON run configuration.

Parsing is strict: unknown keys are rejected and every error names the
dotted key path, so a config that validates is a config that reproduces.
The raw file is fingerprinted (sha256) and archived beside the outputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .energy import CarbonFactors
from .loadgen import (
    DEFAULT_MAX_IN_FLIGHT,
    DEFAULT_REQUEST_TIMEOUT_S,
    DEFAULT_WARMUP_ITERATIONS,
    ClosedLoop,
    OpenLoopPoisson,
    RunPlan,
    StaticBatch,
    TrafficModel,
)
from .protocol import StdioTransport, TcpTransport, TransportConfig
from .sampling import PowerSourceConfig, SyntheticWaveform


class ConfigError(ValueError):
    """A config defect, reported with its dotted key path."""


@dataclass(frozen=True)
class BenchConfig:
    """A validated run configuration: exactly one RunPlan plus the runner."""

    runner: TransportConfig
    plan: RunPlan
    fingerprint: str
    raw: dict


def config_fingerprint(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _check_keys(obj: dict, allowed: set[str], path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key (allowed: {sorted(allowed)})")


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise ConfigError(f"{path}.{key}: required key missing")
    return obj[key]


def _number(value, path: str, *, minimum=None, exclusive_minimum=None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {value}")
    if exclusive_minimum is not None and value <= exclusive_minimum:
        raise ConfigError(f"{path}: must be > {exclusive_minimum}, got {value}")
    return float(value)


def _integer(value, path: str, *, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {value}")
    return value


def _string(value, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    return value


def parse_runner(obj, path: str = "runner") -> TransportConfig:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    _check_keys(obj, {"command", "host", "port", "connect_timeout_s"}, path)
    timeout = _number(obj.get("connect_timeout_s", 10.0), f"{path}.connect_timeout_s", exclusive_minimum=0)
    has_command = "command" in obj
    has_tcp = "host" in obj or "port" in obj
    if has_command == has_tcp:
        raise ConfigError(f"{path}: set either command or host+port, not both")
    if has_command:
        command = obj["command"]
        if not isinstance(command, list) or not command or not all(isinstance(c, str) for c in command):
            raise ConfigError(f"{path}.command: expected a non-empty list of strings")
        return StdioTransport(command=tuple(command), connect_timeout_s=timeout)
    host = _string(_require(obj, "host", path), f"{path}.host")
    port = _integer(_require(obj, "port", path), f"{path}.port", minimum=1)
    return TcpTransport(host=host, port=port, connect_timeout_s=timeout)


def parse_traffic(obj, path: str = "traffic") -> TrafficModel:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    mode = _string(_require(obj, "mode", path), f"{path}.mode")
    if mode == "static-batch":
        _check_keys(obj, {"mode", "batch_size", "iterations"}, path)
        return StaticBatch(
            batch_size=_integer(_require(obj, "batch_size", path), f"{path}.batch_size", minimum=1),
            iterations=_integer(_require(obj, "iterations", path), f"{path}.iterations", minimum=1),
        )
    if mode == "open-loop-poisson":
        _check_keys(obj, {"mode", "rate_rps", "duration_s", "batch_size", "seed"}, path)
        seed = obj.get("seed")
        if seed is not None:
            seed = _integer(seed, f"{path}.seed")
        return OpenLoopPoisson(
            rate_rps=_number(_require(obj, "rate_rps", path), f"{path}.rate_rps", exclusive_minimum=0),
            duration_s=_number(_require(obj, "duration_s", path), f"{path}.duration_s", exclusive_minimum=0),
            batch_size=_integer(obj.get("batch_size", 1), f"{path}.batch_size", minimum=1),
            seed=seed,
        )
    if mode == "closed-loop":
        _check_keys(obj, {"mode", "concurrency", "iterations", "duration_s", "batch_size"}, path)
        iterations = obj.get("iterations")
        if iterations is not None:
            iterations = _integer(iterations, f"{path}.iterations", minimum=1)
        duration = obj.get("duration_s")
        if duration is not None:
            duration = _number(duration, f"{path}.duration_s", exclusive_minimum=0)
        if (iterations is None) == (duration is None):
            raise ConfigError(f"{path}: set exactly one of iterations or duration_s")
        return ClosedLoop(
            concurrency=_integer(_require(obj, "concurrency", path), f"{path}.concurrency", minimum=1),
            iterations=iterations,
            duration_s=duration,
            batch_size=_integer(obj.get("batch_size", 1), f"{path}.batch_size", minimum=1),
        )
    raise ConfigError(
        f"{path}.mode: unknown mode {mode!r} "
        "(expected static-batch, open-loop-poisson, or closed-loop)"
    )


def parse_power(obj, path: str = "power", base_dir: Path | None = None) -> PowerSourceConfig:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    kind = _string(_require(obj, "kind", path), f"{path}.kind")
    interval = _number(obj.get("interval_ms", 100.0), f"{path}.interval_ms", exclusive_minimum=0)
    if kind == "synthetic":
        _check_keys(
            obj,
            {"kind", "interval_ms", "waveform", "watts", "start_w", "slope_w_per_s",
             "mean_w", "amplitude_w", "period_s"},
            path,
        )
        shape = _string(_require(obj, "waveform", path), f"{path}.waveform")
        if shape == "constant":
            waveform = SyntheticWaveform.constant(
                _number(_require(obj, "watts", path), f"{path}.watts", minimum=0)
            )
        elif shape == "ramp":
            waveform = SyntheticWaveform.ramp(
                _number(_require(obj, "start_w", path), f"{path}.start_w", minimum=0),
                _number(_require(obj, "slope_w_per_s", path), f"{path}.slope_w_per_s"),
            )
        elif shape == "sinusoid":
            waveform = SyntheticWaveform.sinusoid(
                _number(_require(obj, "mean_w", path), f"{path}.mean_w", minimum=0),
                _number(_require(obj, "amplitude_w", path), f"{path}.amplitude_w", minimum=0),
                _number(_require(obj, "period_s", path), f"{path}.period_s", exclusive_minimum=0),
            )
        else:
            raise ConfigError(f"{path}.waveform: unknown waveform {shape!r}")
        return PowerSourceConfig.synthetic(waveform, interval_ms=interval)
    if kind == "replay":
        _check_keys(obj, {"kind", "interval_ms", "path"}, path)
        replay_path = Path(_string(_require(obj, "path", path), f"{path}.path"))
        if base_dir is not None and not replay_path.is_absolute():
            replay_path = base_dir / replay_path
        return PowerSourceConfig.replay(replay_path, interval_ms=interval)
    if kind == "external-command":
        _check_keys(obj, {"kind", "interval_ms", "command", "mode"}, path)
        mode = _string(obj.get("mode", "per-tick"), f"{path}.mode")
        if mode not in ("per-tick", "stream"):
            raise ConfigError(f"{path}.mode: expected per-tick or stream, got {mode!r}")
        return PowerSourceConfig.external(
            _string(_require(obj, "command", path), f"{path}.command"),
            mode=mode,
            interval_ms=interval,
        )
    raise ConfigError(
        f"{path}.kind: unknown kind {kind!r} (expected synthetic, replay, or external-command)"
    )


def parse_carbon(obj, path: str = "carbon") -> CarbonFactors:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    _check_keys(obj, {"pue", "kappa_kg_per_kwh", "region_label", "timestamp_label"}, path)
    pue = _number(_require(obj, "pue", path), f"{path}.pue")
    if pue < 1.0:
        raise ConfigError(
            f"{path}.pue: must be >= 1.0 (facility overhead cannot reduce IT energy), got {pue}"
        )
    kappa = _number(
        _require(obj, "kappa_kg_per_kwh", path), f"{path}.kappa_kg_per_kwh", minimum=0
    )
    return CarbonFactors(
        pue=pue,
        kappa_kg_per_kwh=kappa,
        region_label=_string(obj.get("region_label", ""), f"{path}.region_label"),
        timestamp_label=_string(obj.get("timestamp_label", ""), f"{path}.timestamp_label"),
    )


_TOP_KEYS = {
    "runner",
    "traffic",
    "warmup_iterations",
    "batch_sweep",
    "power",
    "carbon",
    "output",
    "seed",
    "request_timeout_s",
    "max_in_flight",
}


def parse_config(data: dict, fingerprint: str, base_dir: Path | None = None) -> BenchConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object at the top level")
    _check_keys(data, _TOP_KEYS, "config")
    runner = parse_runner(_require(data, "runner", "config"))
    traffic = parse_traffic(_require(data, "traffic", "config"))
    power = parse_power(_require(data, "power", "config"), base_dir=base_dir)
    carbon = parse_carbon(_require(data, "carbon", "config"))

    batch_sweep = None
    if data.get("batch_sweep") is not None:
        raw_sweep = data["batch_sweep"]
        if not isinstance(raw_sweep, list) or not raw_sweep:
            raise ConfigError("config.batch_sweep: expected a non-empty list of integers")
        batch_sweep = tuple(
            _integer(b, f"config.batch_sweep[{i}]", minimum=1) for i, b in enumerate(raw_sweep)
        )
        if any(a >= b for a, b in zip(batch_sweep, batch_sweep[1:])):
            raise ConfigError("config.batch_sweep: entries must be strictly increasing")

    output = data.get("output")
    if output is not None:
        output = _string(output, "config.output")

    try:
        plan = RunPlan(
            traffic=traffic,
            power_source=power,
            carbon_factors=carbon,
            warmup_iterations=_integer(
                data.get("warmup_iterations", DEFAULT_WARMUP_ITERATIONS),
                "config.warmup_iterations",
                minimum=0,
            ),
            batch_sweep=batch_sweep,
            seed=_integer(data.get("seed", 0), "config.seed"),
            request_timeout_s=_number(
                data.get("request_timeout_s", DEFAULT_REQUEST_TIMEOUT_S),
                "config.request_timeout_s",
                exclusive_minimum=0,
            ),
            max_in_flight=_integer(
                data.get("max_in_flight", DEFAULT_MAX_IN_FLIGHT), "config.max_in_flight", minimum=1
            ),
            output_dir=output,
        )
    except ValueError as exc:
        raise ConfigError(f"config: {exc}") from None
    return BenchConfig(runner=runner, plan=plan, fingerprint=fingerprint, raw=data)


def load_config(path: str | Path) -> BenchConfig:
    path = Path(path)
    try:
        raw_bytes = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    try:
        data = json.loads(raw_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config: {path} is not valid JSON: {exc}") from None
    return parse_config(data, config_fingerprint(raw_bytes), base_dir=path.parent)
