"""Walk through the latency and throughput metrics on hand-built samples.

Shows head/percentile/tail summaries, why the tail is reported separately
from the mean, and how batch size and mean latency pair into throughput.
"""

import random

from inferbench import LatencySample, compute_throughput, summarize_latencies, summarize_workload

MS = 1_000_000  # ns per millisecond


def sample(i: int, duration_ms: float, batch: int = 100) -> LatencySample:
    start = i * 10 * MS
    return LatencySample(
        request_id=i,
        intended_start_ns=start,
        actual_start_ns=start,
        end_ns=start + int(duration_ms * MS),
        batch_size=batch,
    )


def main() -> None:
    # a well-behaved service with a slow tail: most requests ~12.6 ms, a few stragglers
    rng = random.Random(1)
    durations = [rng.gauss(12.6, 0.4) for _ in range(950)] + [rng.uniform(30, 80) for _ in range(50)]
    samples = [sample(i, d) for i, d in enumerate(durations)]

    dist = summarize_latencies(samples, mode="service-time")
    print(f"count  {dist.count}")
    print(f"head   {dist.head_ms:8.2f} ms   (best case)")
    print(f"mean   {dist.mean_ms:8.2f} ms   (the single number most reports stop at)")
    print(f"p50    {dist.p50_ms:8.2f} ms")
    print(f"p95    {dist.p95_ms:8.2f} ms   (tail: what 1 in 20 users sees)")
    print(f"p99    {dist.p99_ms:8.2f} ms")
    print(f"max    {dist.max_ms:8.2f} ms")
    print()

    # the mean hides the tail: p99 here is several times the median
    print(f"tail inflation p99/p50: {dist.p99_ms / dist.p50_ms:.1f}x")
    print()

    # throughput = items per request / mean latency; the unit and basis are
    # carried so token and sample throughput never get compared silently
    workload = summarize_workload(samples)
    throughput = compute_throughput(dist, workload, "samples/s")
    print(f"batch size      {workload.batch_size_stats.mean:.0f}")
    print(f"throughput      {throughput.value:,.2f} {throughput.unit} ({throughput.basis})")


if __name__ == "__main__":
    main()
