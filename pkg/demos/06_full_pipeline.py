"""End to end: run, write artifacts, replay them bit-identically.

Drives the whole pipeline against an in-process runner: warmup, measured
static batches, concurrent power sampling, record assembly, artifact
emission, and a deterministic replay that recomputes every metric from the
stored raw samples and trace.
"""

import tempfile
from pathlib import Path

from inferbench import (
    CarbonFactors,
    InProcessRunner,
    PowerSourceConfig,
    RunPlan,
    StaticBatch,
    SyntheticWaveform,
    execute_run,
    emit_table,
)
from inferbench.artifacts import replay_run_dir, write_run_dir


def main() -> None:
    plan = RunPlan(
        traffic=StaticBatch(batch_size=64, iterations=40),
        power_source=PowerSourceConfig.synthetic(SyntheticWaveform.constant(75.0), interval_ms=50),
        carbon_factors=CarbonFactors(pue=1.3, kappa_kg_per_kwh=0.42, region_label="demo-grid"),
        warmup_iterations=5,
        seed=21,
    )
    runner = InProcessRunner(base_delay_ms=4.0, per_item_delay_ms=0.02)
    try:
        raw = execute_run(plan, runner)
    finally:
        runner.close()
    print(f"measured {len(raw.samples)} requests, {raw.error_count} errors")
    print(f"power trace: {len(raw.trace.samples)} samples from {raw.trace.source_id}")

    config_raw = {
        "traffic": {"mode": "static-batch", "batch_size": 64, "iterations": 40},
        "power": {"kind": "synthetic", "waveform": "constant", "watts": 75.0},
        "carbon": {"pue": 1.3, "kappa_kg_per_kwh": 0.42, "region_label": "demo-grid"},
        "seed": 21,
    }
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "run"
        artifacts = write_run_dir(out, raw, plan.carbon_factors, "demo-fingerprint", plan.seed, config_raw)
        print(f"\nartifacts in {out}:")
        for path in sorted(out.iterdir()):
            print(f"  {path.name:12s} {path.stat().st_size:7,d} bytes")

        print()
        print(emit_table(artifacts.records, fmt="text"))

        replayed = replay_run_dir(out)
        identical = replayed.report_json.encode() == (out / "report.json").read_bytes()
        print(f"replay recomputed report.json bit-identical: {identical}")


if __name__ == "__main__":
    main()
