"""inferbench: benchmark AI inference runners over a language-neutral protocol.

Measures latency distributions (head / percentiles / tail), throughput,
integrated energy, and location-adjusted carbon, then joins them into
comparable, Pareto-rankable benchmark records.
"""

from .energy import (
    CarbonFactors,
    CarbonReading,
    EnergyReading,
    PowerSample,
    PowerTrace,
    compute_carbon,
    convert_energy_units,
    integrate_energy,
    read_trace_csv,
    write_trace_csv,
)
from .fakes import InProcessRunner, default_handshake
from .loadgen import (
    ClosedLoop,
    OpenLoopPoisson,
    RawRunRecord,
    RunPlan,
    StaticBatch,
    execute_run,
    generate_arrivals,
    run_batch_sweep,
)
from .metrics import (
    LatencyDistribution,
    LatencySample,
    RangeStats,
    ThroughputReading,
    WorkloadDescriptor,
    compute_throughput,
    summarize_latencies,
    summarize_workload,
)
from .protocol import (
    DeviceAnnotations,
    Handshake,
    InferRequest,
    InferResponse,
    RunnerSession,
    StdioTransport,
    TcpTransport,
    check_conformance,
    open_session,
)
from .report import (
    BenchmarkRecord,
    ParetoPoint,
    assemble_record,
    emit_json,
    emit_table,
    frontier_records,
    load_json,
    pareto_frontier,
)
from .sampling import PowerSourceConfig, SyntheticWaveform, start_sampling, stop_sampling

__version__ = "0.1.0"
