"""Open-loop vs closed-loop load against the same deterministic runner.

Closed-loop traffic waits for each response before sending the next
request, so it can never observe a queue. Open-loop traffic arrives on a
Poisson schedule whether or not the runner keeps up; push it past the
service rate and response times grow while pure service times stay flat.
"""

from inferbench import (
    CarbonFactors,
    ClosedLoop,
    InProcessRunner,
    OpenLoopPoisson,
    PowerSourceConfig,
    RunPlan,
    SyntheticWaveform,
    execute_run,
    summarize_latencies,
)

POWER = PowerSourceConfig.synthetic(SyntheticWaveform.constant(60.0), interval_ms=50)
FACTORS = CarbonFactors(pue=1.2, kappa_kg_per_kwh=0.4, region_label="demo")

SERVICE_MS = 8.0  # the runner serves ~125 requests/s


def run(traffic) -> None:
    runner = InProcessRunner(base_delay_ms=SERVICE_MS)
    try:
        plan = RunPlan(traffic=traffic, power_source=POWER, carbon_factors=FACTORS,
                       warmup_iterations=3, seed=11)
        record = execute_run(plan, runner)
    finally:
        runner.close()
    service = summarize_latencies(record.samples, mode="service-time")
    response = summarize_latencies(record.samples, mode="response-time")
    print(f"  requests        {len(record.samples)}")
    print(f"  service  p50/p99   {service.p50_ms:7.1f} / {service.p99_ms:7.1f} ms")
    print(f"  response p50/p99   {response.p50_ms:7.1f} / {response.p99_ms:7.1f} ms")
    print()


def main() -> None:
    print(f"runner service time: {SERVICE_MS} ms (~{1000 / SERVICE_MS:.0f} rps capacity)\n")

    print("closed loop, 1 worker (queueing structurally invisible):")
    run(ClosedLoop(concurrency=1, iterations=150))

    print("open loop at 60% of capacity (queue stays short):")
    run(OpenLoopPoisson(rate_rps=75.0, duration_s=1.5, seed=7))

    print("open loop at 160% of capacity (queue grows, tail explodes):")
    run(OpenLoopPoisson(rate_rps=200.0, duration_s=1.5, seed=7))

    print("the response-time tail under overload is the signal single-number")
    print("summaries and closed-loop harnesses both miss.")


if __name__ == "__main__":
    main()
