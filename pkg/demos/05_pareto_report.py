"""Join records into a comparison table and rank them on a Pareto frontier.

Uses rows shaped like a published single-GPU comparison (throughput,
latency, energy, carbon per runtime/precision) to show dominance analysis:
a row that is better on every objective eliminates the rest.
"""

from inferbench import (
    BenchmarkRecord,
    CarbonFactors,
    DeviceAnnotations,
    EnergyReading,
    LatencyDistribution,
    RangeStats,
    ThroughputReading,
    WorkloadDescriptor,
    emit_table,
    frontier_records,
    pareto_frontier,
)
from inferbench.energy import compute_carbon

DEVICE = DeviceAnnotations("consumer-gpu", "PCIe", "GDDR", "default")

# (model, platform, precision, samples/s, ms, Wh, CE mg) at batch 100
ROWS = [
    ("ResNet-50", "PyTorch", "FP16", 1518.69, 65.85, 0.782, 45.58),
    ("ResNet-50", "ONNX", "FP16", 1910.61, 52.34, 0.653, 38.01),
    ("ResNet-50", "TensorRT", "FP16", 1703.77, 58.69, 0.647, 37.68),
    ("ResNet-50", "TensorRT", "INT8", 3004.10, 33.29, 0.297, 17.29),
]


def record(model, platform, precision, thr, lat, wh, ce_mg) -> BenchmarkRecord:
    energy = EnergyReading(energy_wh=wh, window_ns=(0, 10**9), sample_count=2)
    factors = CarbonFactors(pue=1.0, kappa_kg_per_kwh=(ce_mg / 1000.0) / wh)
    return BenchmarkRecord(
        model_name=model,
        platform=platform,
        precision=precision,
        device=DEVICE,
        traffic={"mode": "static-batch", "batch_size": 100},
        workload=WorkloadDescriptor(RangeStats(100, 100, 100), 100, 10_000),
        latency=LatencyDistribution(100, lat, lat, {0.5: lat, 0.95: lat, 0.99: lat}, lat),
        throughput=ThroughputReading(thr, "samples/s", "per-batch"),
        energy=energy,
        carbon=compute_carbon(energy, factors),
        error_count=0,
        seed=0,
        config_fingerprint="demo",
    )


def main() -> None:
    records = [record(*row) for row in ROWS]
    print(emit_table(records, fmt="text"))

    objectives = [("latency", "min"), ("energy", "min"), ("carbon", "min"), ("throughput", "max")]
    points = pareto_frontier(records, objectives)
    print("objectives:", ", ".join(f"{n} {d}" for n, d in objectives))
    print("frontier:")
    for r in frontier_records(points):
        print(f"  {r.model_name}  {r.platform_precision}")
    for p in points:
        if p.dominated:
            witness = records[p.dominated_by]
            print(
                f"  {p.record.platform_precision:16s} dominated by {witness.platform_precision}"
            )


if __name__ == "__main__":
    main()
