"""Power traces, trapezoidal energy integration, and carbon conversion.

Energy is integrated in joules (double precision) and converted to
watt-hours once, at the reading boundary. Carbon follows the standard
location-adjusted form: grams CO2e = PUE x grid intensity (kg/kWh) x Wh.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

TRACE_CSV_HEADER = "timestamp_ns,power_w"

# carbon consistency slack: one multiply chain of float rounding
_CARBON_RTOL = 1e-9


class InsufficientSamplesError(ValueError):
    """Fewer than two power samples; nothing to integrate."""


class WindowOverlapError(ValueError):
    """The integration window does not overlap the trace's time span."""


class UnitError(ValueError):
    """Unknown energy unit."""


class TraceParseError(ValueError):
    """A power-trace CSV file could not be parsed."""

    def __init__(self, path: str, line_number: int, message: str):
        super().__init__(f"{path}:{line_number}: {message}")
        self.path = path
        self.line_number = line_number


@dataclass(frozen=True)
class PowerSample:
    timestamp_ns: int
    power_w: float

    def __post_init__(self) -> None:
        if self.power_w < 0:
            raise ValueError(f"power must be non-negative, got {self.power_w}")


@dataclass(frozen=True)
class PowerTrace:
    """Time-ordered power samples from one source."""

    samples: tuple[PowerSample, ...]
    source_id: str = ""

    def __post_init__(self) -> None:
        if len(self.samples) < 2:
            raise InsufficientSamplesError(
                f"a power trace needs at least 2 samples to integrate, got {len(self.samples)}"
            )
        for a, b in zip(self.samples, self.samples[1:]):
            if b.timestamp_ns <= a.timestamp_ns:
                raise ValueError(
                    f"timestamps must be strictly increasing, got {a.timestamp_ns} then {b.timestamp_ns}"
                )

    @property
    def start_ns(self) -> int:
        return self.samples[0].timestamp_ns

    @property
    def end_ns(self) -> int:
        return self.samples[-1].timestamp_ns


@dataclass(frozen=True)
class EnergyReading:
    """Integrated energy in watt-hours over a clamped window."""

    energy_wh: float
    window_ns: tuple[int, int]
    sample_count: int

    def __post_init__(self) -> None:
        if self.energy_wh < 0:
            raise ValueError(f"energy must be non-negative, got {self.energy_wh}")
        if self.window_ns[1] <= self.window_ns[0]:
            raise ValueError(f"window end must be after start, got {self.window_ns}")


@dataclass(frozen=True)
class CarbonFactors:
    """Facility overhead (PUE) and grid carbon intensity for one run.

    Both factors are mandatory run configuration; reports carry them
    verbatim so the accounting stays auditable.
    """

    pue: float
    kappa_kg_per_kwh: float
    region_label: str = ""
    timestamp_label: str = ""

    def __post_init__(self) -> None:
        if self.pue < 1.0:
            raise ValueError(
                f"pue must be >= 1.0 (facility overhead cannot reduce IT energy), got {self.pue}"
            )
        if self.kappa_kg_per_kwh < 0:
            raise ValueError(f"kappa must be non-negative, got {self.kappa_kg_per_kwh}")


@dataclass(frozen=True)
class CarbonReading:
    """Grams CO2e for an energy reading under explicit factors."""

    carbon_g: float
    factors: CarbonFactors
    energy: EnergyReading

    def __post_init__(self) -> None:
        expected = self.factors.pue * self.factors.kappa_kg_per_kwh * self.energy.energy_wh
        tol = max(abs(expected), 1e-12) * _CARBON_RTOL
        if abs(self.carbon_g - expected) > tol:
            raise ValueError(
                f"carbon_g {self.carbon_g} inconsistent with pue*kappa*energy = {expected}"
            )


def integrate_energy(trace: PowerTrace, window_ns: tuple[int, int]) -> EnergyReading:
    """Trapezoid-rule energy over the window, clamped to the trace span.

    Power at the window edges is linearly interpolated from the bracketing
    samples, so samples outside the window contribute only through the
    edges. The trapezoid rule is exact for constant and linear power.
    """
    start, end = window_ns
    if end <= start:
        raise ValueError(f"window end must be after start, got {window_ns}")
    ts = np.array([s.timestamp_ns for s in trace.samples], dtype=np.int64)
    ps = np.array([s.power_w for s in trace.samples], dtype=np.float64)

    lo = max(int(start), int(ts[0]))
    hi = min(int(end), int(ts[-1]))
    if lo >= hi:
        raise WindowOverlapError(
            f"window {window_ns} does not overlap trace span ({ts[0]}, {ts[-1]})"
        )

    # Work relative to the first sample so float64 keeps full ns precision.
    rel = (ts - ts[0]).astype(np.float64)
    rel_lo = float(lo - int(ts[0]))
    rel_hi = float(hi - int(ts[0]))
    inside = (ts > lo) & (ts < hi)
    knot_t = np.concatenate(([rel_lo], rel[inside], [rel_hi]))
    knot_p = np.concatenate(
        ([np.interp(rel_lo, rel, ps)], ps[inside], [np.interp(rel_hi, rel, ps)])
    )
    joules = float(np.trapezoid(knot_p, knot_t / 1e9))
    return EnergyReading(
        energy_wh=joules / 3600.0,
        window_ns=(lo, hi),
        sample_count=int(inside.sum()) + 2,
    )


def compute_carbon(energy: EnergyReading, factors: CarbonFactors) -> CarbonReading:
    """Location-adjusted carbon: 1 Wh at 1 kg/kWh and PUE 1 is exactly 1 g."""
    carbon_g = factors.pue * factors.kappa_kg_per_kwh * energy.energy_wh
    return CarbonReading(carbon_g=carbon_g, factors=factors, energy=energy)


_JOULES_PER = {"J": 1.0, "Wh": 3600.0, "kWh": 3.6e6}


def convert_energy_units(value: float, from_unit: str, to_unit: str) -> float:
    """Convert between J, Wh, and kWh by the exact 3600/1000 factors."""
    try:
        from_factor = _JOULES_PER[from_unit]
        to_factor = _JOULES_PER[to_unit]
    except KeyError as exc:
        raise UnitError(f"unknown energy unit {exc.args[0]!r}") from None
    return value * from_factor / to_factor


def write_trace_csv(trace: PowerTrace, path: str | Path) -> None:
    """Write a trace as CSV: header ``timestamp_ns,power_w``, LF endings.

    Powers are written with repr so the file round-trips bit-exactly.
    """
    lines = [TRACE_CSV_HEADER]
    lines.extend(f"{s.timestamp_ns},{s.power_w!r}" for s in trace.samples)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_trace_csv(path: str | Path, source_id: str | None = None) -> PowerTrace:
    """Parse a power-trace CSV; parse errors cite the offending line number."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0].strip() != TRACE_CSV_HEADER:
        found = lines[0].strip() if lines else "<empty file>"
        raise TraceParseError(str(path), 1, f"expected header {TRACE_CSV_HEADER!r}, found {found!r}")
    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise TraceParseError(str(path), lineno, f"expected 2 fields, got {len(parts)}")
        try:
            ts = int(parts[0])
            power = float(parts[1])
        except ValueError as exc:
            raise TraceParseError(str(path), lineno, str(exc)) from None
        try:
            samples.append(PowerSample(timestamp_ns=ts, power_w=power))
        except ValueError as exc:
            raise TraceParseError(str(path), lineno, str(exc)) from None
    if source_id is None:
        source_id = f"replay:{path.name}"
    return PowerTrace(samples=tuple(samples), source_id=source_id)
