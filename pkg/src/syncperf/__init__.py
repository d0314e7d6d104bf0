"""GPU synchronization cost modeling and micro-benchmark analysis toolkit."""

from .analysis import (
    ClockDomain,
    DifferenceEstimate,
    FusionExperiment,
    RepeatDiffExperiment,
    TimingSample,
    instruction_latency,
    kernel_total_latency,
    launch_overhead,
    peak_throughput,
    saturation_check,
    saturation_threshold_ns,
)
from .dataio import (
    ExperimentRecord,
    ExperimentSpec,
    MeasurementBatch,
    Provenance,
    Report,
    ReportTable,
    emit_report,
    load_device_profile,
    load_measurements,
    save_device_profile,
    save_measurements,
)
from .device import DeviceProfile, Interconnect
from .emulate import (
    EmulatedDevice,
    generate_fusion_batch,
    generate_repeatdiff_batch,
    generate_sync_sweep_batch,
)
from .errors import ParseError, SyncperfError, ValidationError
from .model import (
    CostPoint,
    ScenarioKind,
    SwitchScenario,
    SyncCost,
    SyncLevel,
    active_warps_per_sm,
    classify_scenario,
    little_law_concurrency,
    prefer_fewer_workers,
    switch_point_above,
    switch_point_between,
)
from .recommend import (
    BarrierCostTable,
    BarrierRecommendation,
    MechanismCost,
    ReductionQuery,
    ReductionRecommendation,
    multi_grid_config_ok,
    recommend_barrier,
    recommend_reduction_config,
)

__version__ = "0.1.0"
