"""Integrate a power trace into watt-hours and convert to grams CO2e.

The trace is integrated with the trapezoid rule over a clamped window;
carbon applies explicit, auditable factors: grams = PUE x kappa x Wh.
"""

import math

from inferbench import (
    CarbonFactors,
    PowerSample,
    PowerTrace,
    compute_carbon,
    convert_energy_units,
    integrate_energy,
)

SECOND_NS = 1_000_000_000


def main() -> None:
    # a GPU-ish power profile: idle, a loaded plateau with ripple, idle again
    samples = []
    for tick in range(0, 1200):  # 120 s at 100 ms
        t = tick / 10.0
        if t < 10 or t > 110:
            watts = 45.0
        else:
            watts = 280.0 + 25.0 * math.sin(2 * math.pi * t / 7.0)
        samples.append(PowerSample(int(t * SECOND_NS), watts))
    trace = PowerTrace(samples=tuple(samples), source_id="demo:synthetic-gpu")

    # integrate only the loaded window, the way a run integrates exactly
    # (first measured request, last response)
    loaded = integrate_energy(trace, (10 * SECOND_NS, 110 * SECOND_NS))
    whole = integrate_energy(trace, (trace.start_ns, trace.end_ns))
    print(f"loaded window : {loaded.energy_wh:.3f} Wh over {loaded.sample_count} samples")
    print(f"whole trace   : {whole.energy_wh:.3f} Wh")
    print(f"in joules     : {convert_energy_units(loaded.energy_wh, 'Wh', 'J'):,.0f} J")
    print()

    # same energy, two grids: the factors travel with every report row
    for factors in (
        CarbonFactors(pue=1.1, kappa_kg_per_kwh=0.045, region_label="hydro-heavy grid"),
        CarbonFactors(pue=1.6, kappa_kg_per_kwh=0.65, region_label="coal-heavy grid"),
    ):
        carbon = compute_carbon(loaded, factors)
        print(
            f"{factors.region_label:18s} PUE {factors.pue:.1f}  "
            f"kappa {factors.kappa_kg_per_kwh:.3f} kg/kWh  ->  {carbon.carbon_g:8.3f} g CO2e"
        )


if __name__ == "__main__":
    main()
