"""Bundled reference measurements for V100 (DGX-1) and P100 platforms.

Everything the model needs offline lives here: launch overheads, warp/block
synchronization latencies and throughputs, the per-configuration cost points
with their published switch points, reduction bandwidths, device profiles,
and barrier cost series for the advisor. Values are frozen; ``fingerprint()``
guards against accidental edits.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields
from enum import Enum

from .dataio import ReportTable
from .device import DeviceProfile, Interconnect
from .errors import ValidationError
from .model import CostPoint, SyncCost, SyncLevel
from .recommend import BarrierCostTable, MechanismCost

DEVICE_KEYS = ("v100", "p100")


class TableId(Enum):
    LAUNCH_OVERHEAD_T1 = "launch_overhead_t1"
    WARP_SYNC_T2 = "warp_sync_t2"
    CONCURRENCY_T3 = "concurrency_t3"
    SWITCH_POINTS_T4 = "switch_points_t4"
    REDUCTION_BW_T5 = "reduction_bw_t5"
    WARP_REDUCTION_T6 = "warp_reduction_t6"


@dataclass(frozen=True)
class LaunchOverheadRow:
    launch_type: str
    overhead_ns: float
    null_kernel_total_ns: float


@dataclass(frozen=True)
class WarpSyncRow:
    sync_type: str
    latency_v100_cycles: float
    latency_p100_cycles: float
    throughput_v100_per_cycle: float
    throughput_p100_per_cycle: float
    reference_v100: float | None
    reference_p100: float | None


@dataclass(frozen=True)
class ConcurrencyRow:
    scenery: int
    label: str
    bandwidth_v100_bytes_per_cycle: float
    bandwidth_p100_bytes_per_cycle: float
    latency_v100_cycles: float
    latency_p100_cycles: float
    concurrency_v100_bytes: float
    concurrency_p100_bytes: float


@dataclass(frozen=True)
class SwitchPointRow:
    scenery: int
    label: str
    kind: str  # "N_l" | "N_m"
    sync_v100_cycles: float | None  # total across the 5 invocations
    sync_p100_cycles: float | None
    switch_v100_bytes: float
    switch_p100_bytes: float


@dataclass(frozen=True)
class ReductionBandwidthRow:
    device: str
    implicit_gbps: float
    grid_sync_gbps: float
    cub_gbps: float
    cuda_sample_gbps: float
    theory_gbps: float


@dataclass(frozen=True)
class WarpReductionRow:
    device: str
    serial_cycles: float
    nosync_cycles: float  # result incorrect without synchronization
    volatile_tile_cycles: float
    tile_cycles: float
    coalesced_cycles: float
    tile_shuffle_cycles: float
    coalesced_shuffle_cycles: float


LAUNCH_OVERHEAD_T1 = (
    LaunchOverheadRow("traditional", 1081.0, 8888.0),
    LaunchOverheadRow("cooperative", 1063.0, 10248.0),
    LaunchOverheadRow("cooperative_multi_device", 1258.0, 10874.0),
)

WARP_SYNC_T2 = (
    WarpSyncRow("tile", 14.0, 1.0, 0.812, 1.774, None, None),
    WarpSyncRow("shuffle_tile", 22.0, 31.0, 0.928, 0.642, 32.0, 32.0),
    WarpSyncRow("coalesced_1_31", 108.0, 1.0, 0.167, 1.791, None, None),
    WarpSyncRow("coalesced_32", 14.0, 1.0, 1.306, 1.821, None, None),
    WarpSyncRow("shuffle_coalesced", 77.0, 50.0, 0.121, 0.166, None, None),
    WarpSyncRow("block_warp", 22.0, 218.0, 0.475, 0.091, 16.0, 32.0),
)

CONCURRENCY_T3 = (
    ConcurrencyRow(1, "1 thrd.", 0.62, 0.43, 13.0, 18.5, 8.0, 8.0),
    ConcurrencyRow(1, "1 warp", 19.6, 13.8, 13.0, 18.5, 256.0, 256.0),
    ConcurrencyRow(2, "32 thrd.", 19.6, 13.8, 13.0, 18.5, 256.0, 256.0),
    ConcurrencyRow(2, "1024 thrd", 215.0, 141.0, 13.0, 18.5, 2796.0, 2615.0),
)

SYNC_INVOCATIONS_PER_REDUCTION = 5  # 32-wide tree reduction: 5 barrier steps

SWITCH_POINTS_T4 = (
    SwitchPointRow(1, "1 warp", "N_l", 110.0, 155.0, 70.0, 70.0),
    SwitchPointRow(1, "1 warp", "N_m", None, None, 76.0, 75.0),
    SwitchPointRow(2, "1024 thrd", "N_l", 420.0, 2135.0, 9076.0, 32681.0),
    SwitchPointRow(2, "1024 thrd", "N_m", None, None, 8501.0, 29737.0),
)

REDUCTION_BW_T5 = (
    ReductionBandwidthRow("V100", 865.40, 855.59, 849.39, 852.98, 898.05),
    ReductionBandwidthRow("P100", 592.40, 590.85, 543.96, 590.65, 732.16),
)

WARP_REDUCTION_T6 = (
    WarpReductionRow("V100", 299.0, 89.0, 237.0, 237.0, 237.0, 164.0, 1261.0),
    WarpReductionRow("P100", 383.0, 112.0, 282.0, 281.0, 251.0, 212.0, 1423.0),
)

_FIXTURE_ROWS = {
    TableId.LAUNCH_OVERHEAD_T1: LAUNCH_OVERHEAD_T1,
    TableId.WARP_SYNC_T2: WARP_SYNC_T2,
    TableId.CONCURRENCY_T3: CONCURRENCY_T3,
    TableId.SWITCH_POINTS_T4: SWITCH_POINTS_T4,
    TableId.REDUCTION_BW_T5: REDUCTION_BW_T5,
    TableId.WARP_REDUCTION_T6: WARP_REDUCTION_T6,
}


@dataclass(frozen=True)
class FixtureTable:
    table_id: TableId
    rows: tuple

    def to_report_table(self) -> ReportTable:
        columns = tuple(f.name for f in fields(self.rows[0]))
        data = tuple(tuple(getattr(row, c) for c in columns) for row in self.rows)
        return ReportTable(self.table_id.value, columns, data)


def fixture_table(table_id: TableId) -> FixtureTable:
    return FixtureTable(table_id, _FIXTURE_ROWS[table_id])


DEVICE_PROFILES = {
    "v100": DeviceProfile(
        name="V100",
        sm_count=80,
        warp_size=32,
        max_warps_per_sm=64,
        max_threads_per_block=1024,
        clock_mhz=1312.0,
        gpu_count=8,
        interconnect=Interconnect.NVLINK,
    ),
    "p100": DeviceProfile(
        name="P100",
        sm_count=56,
        warp_size=32,
        max_warps_per_sm=64,
        max_threads_per_block=1024,
        clock_mhz=1189.0,
        gpu_count=2,
        interconnect=Interconnect.PCIE,
    ),
}


def device_profile(key: str) -> DeviceProfile:
    try:
        return DEVICE_PROFILES[key.lower()]
    except KeyError:
        raise ValidationError(
            f"unknown device fixture {key!r}; expected one of {DEVICE_KEYS}")


@dataclass(frozen=True)
class ScenerySpec:
    """One basic-vs-more comparison: cost points plus the barrier it pays."""

    scenery: int
    basic: CostPoint
    more: CostPoint
    sync: SyncCost


_SCENERY_SYNC_LEVEL = {1: SyncLevel.WARP_TILE, 2: SyncLevel.BLOCK}


def scenery_specs(device_key: str) -> tuple[ScenerySpec, ...]:
    """Cost points and sync costs behind the published switch points."""
    device_key = device_key.lower()
    if device_key not in DEVICE_KEYS:
        raise ValidationError(
            f"unknown device fixture {device_key!r}; expected one of {DEVICE_KEYS}")
    suffix = device_key

    def point(row: ConcurrencyRow) -> CostPoint:
        return CostPoint(
            label=row.label,
            latency_cycles=getattr(row, f"latency_{suffix}_cycles"),
            throughput_bytes_per_cycle=getattr(row, f"bandwidth_{suffix}_bytes_per_cycle"),
            concurrency_bytes=getattr(row, f"concurrency_{suffix}_bytes"),
        )

    by_scenery: dict[int, list[ConcurrencyRow]] = {}
    for row in CONCURRENCY_T3:
        by_scenery.setdefault(row.scenery, []).append(row)

    specs = []
    for scenery, rows in sorted(by_scenery.items()):
        basic_row, more_row = rows
        total = next(
            getattr(r, f"sync_{suffix}_cycles") for r in SWITCH_POINTS_T4
            if r.scenery == scenery and r.kind == "N_l")
        specs.append(ScenerySpec(
            scenery=scenery,
            basic=point(basic_row),
            more=point(more_row),
            sync=SyncCost(
                level=_SCENERY_SYNC_LEVEL[scenery],
                latency_cycles=total / SYNC_INVOCATIONS_PER_REDUCTION,
                per_invocation_count=SYNC_INVOCATIONS_PER_REDUCTION,
            ),
        ))
    return tuple(specs)


def reduction_ladder(device_key: str) -> tuple[tuple[CostPoint, SyncCost], ...]:
    """Merged candidate ladder across both sceneries (1 thread -> 1 warp ->
    1024 threads); the 32-thread and 1-warp rows are the same configuration."""
    s1, s2 = scenery_specs(device_key)
    no_sync = SyncCost(SyncLevel.WARP_TILE, 0.0, 1)
    return (
        (s1.basic, no_sync),
        (s1.more, s1.sync),
        (s2.more, s2.sync),
    )


# Barrier cost series (ns). Single-GPU grid sync stores the bound on its gap
# to the implicit barrier at 2 blocks/SM; multi-GPU series keep the two
# plateaus (2-5 and 6-8 GPUs) with the published 8-GPU anchors: CPU-side
# steady near the null-kernel total latency, multi-grid at the 3x bound.
BARRIER_COSTS = BarrierCostTable((
    MechanismCost(
        mechanism="implicit_launch",
        per_barrier_ns={1: 1081.0, 2: 7800.0, 3: 15000.0, 4: 17000.0,
                        5: 19000.0, 6: 27000.0, 7: 29000.0, 8: 31000.0},
        one_time_ns=0.0,
    ),
    MechanismCost(
        mechanism="cpu_side",
        per_barrier_ns={g: 8000.0 for g in range(1, 9)},
        one_time_ns=0.0,
    ),
    MechanismCost(
        mechanism="grid",
        per_barrier_ns={1: 2500.0},
        one_time_ns=1063.0,
    ),
    MechanismCost(
        mechanism="multi_grid",
        per_barrier_ns={1: 2600.0, 2: 13000.0, 3: 13000.0, 4: 13000.0,
                        5: 13000.0, 6: 24000.0, 7: 24000.0, 8: 24000.0},
        one_time_ns=1258.0,
    ),
))


def block_sync_sweep_v100() -> tuple[tuple[tuple[int, int], float], ...]:
    """Block-sync throughput sweep (warp-syncs/cycle) over launch shapes.

    Linear ramp in active warps per SM, saturating at the device cap where
    throughput reaches the published 0.475.
    """
    profile = DEVICE_PROFILES["v100"]
    peak = 0.475
    entries = []
    for threads in (32, 64, 128, 256, 512, 1024):
        for blocks in (1, 2, 4, 8, 16, 32):
            warps = min(profile.max_warps_per_sm,
                        blocks * (threads // profile.warp_size))
            throughput = peak * warps / profile.max_warps_per_sm
            entries.append(((threads, blocks), throughput))
    return tuple(entries)


def multi_gpu_series() -> ReportTable:
    """Per-barrier latency (ns) by GPU count for each mechanism with data."""
    counts = sorted({g for m in BARRIER_COSTS.mechanisms for g in m.per_barrier_ns})
    columns = ("gpu_count", *[m.mechanism for m in BARRIER_COSTS.mechanisms])
    rows = []
    for g in counts:
        rows.append(tuple([g] + [m.per_barrier_ns.get(g)
                                 for m in BARRIER_COSTS.mechanisms]))
    return ReportTable("multi_gpu_barrier_latency_ns", columns, tuple(rows))


# Pinned digest of the bundled data; validate and the test suite recompute it.
FINGERPRINT = "5763b8eb626a4069a3ffcb1621aa4f2a09560a852168b8ee13e18888cee6c0d0"


def fingerprint() -> str:
    """SHA-256 over a canonical dump of every bundled table."""
    digest = hashlib.sha256()
    for table_id in TableId:
        digest.update(table_id.value.encode())
        for row in _FIXTURE_ROWS[table_id]:
            for f in fields(row):
                digest.update(f.name.encode())
                digest.update(repr(getattr(row, f.name)).encode())
    for key in DEVICE_KEYS:
        profile = DEVICE_PROFILES[key]
        digest.update(repr((profile.name, profile.sm_count, profile.warp_size,
                            profile.max_warps_per_sm, profile.max_threads_per_block,
                            profile.clock_mhz, profile.gpu_count,
                            profile.interconnect.value)).encode())
    for mechanism in BARRIER_COSTS.mechanisms:
        digest.update(mechanism.mechanism.encode())
        digest.update(repr(sorted(mechanism.per_barrier_ns.items())).encode())
        digest.update(repr(mechanism.one_time_ns).encode())
    return digest.hexdigest()
