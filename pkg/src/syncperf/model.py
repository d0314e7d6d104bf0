"""Analytical cost model for choosing a synchronization granularity.

The model treats one worker-group configuration as a (latency, throughput)
pair, derives the bytes it can keep in flight from Little's Law, and compares
a small configuration ("fewer workers") against a bigger one that must pay a
synchronization cost on top. Two closed-form switch points bound the input
sizes for which fewer workers win.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .device import DeviceProfile
from .errors import ValidationError


class SyncLevel(Enum):
    WARP_TILE = "warp_tile"
    WARP_COALESCED = "warp_coalesced"
    BLOCK = "block"
    GRID = "grid"
    MULTI_GRID = "multi_grid"
    IMPLICIT_LAUNCH = "implicit_launch"
    CPU_SIDE = "cpu_side"


@dataclass(frozen=True)
class CostPoint:
    """One execution configuration: latency (cycles), throughput (bytes/cycle).

    ``concurrency_bytes`` holds a published/measured concurrency when one is
    available (tabulated values are rounded); when absent it is derived as
    latency * throughput.
    """

    label: str
    latency_cycles: float
    throughput_bytes_per_cycle: float
    concurrency_bytes: float | None = None

    def __post_init__(self) -> None:
        if self.latency_cycles <= 0:
            raise ValidationError(f"{self.label!r}: latency must be > 0")
        if self.throughput_bytes_per_cycle <= 0:
            raise ValidationError(f"{self.label!r}: throughput must be > 0")
        if self.concurrency_bytes is not None and self.concurrency_bytes <= 0:
            raise ValidationError(f"{self.label!r}: concurrency must be > 0")

    @property
    def concurrency(self) -> float:
        """Bytes in flight: the stored value if any, else derived."""
        if self.concurrency_bytes is not None:
            return self.concurrency_bytes
        return little_law_concurrency(self.latency_cycles, self.throughput_bytes_per_cycle)


@dataclass(frozen=True)
class SyncCost:
    """Synchronization latency and how many times it is paid per pass.

    ``total_cycles`` is always latency * count; the invocation count is kept
    explicit (a 32-element tree reduction pays the barrier 5 times).
    """

    level: SyncLevel
    latency_cycles: float
    per_invocation_count: int = 1

    def __post_init__(self) -> None:
        if self.latency_cycles < 0:
            raise ValidationError("sync latency must be >= 0")
        if self.per_invocation_count <= 0:
            raise ValidationError("per_invocation_count must be >= 1")

    @property
    def total_cycles(self) -> float:
        return self.latency_cycles * self.per_invocation_count


class ScenarioKind(Enum):
    BELOW_BASIC = "below_basic"
    BETWEEN = "between"
    ABOVE_MORE = "above_more"


@dataclass(frozen=True)
class SwitchScenario:
    """Input-size regime plus the switch point that applies in it (if any)."""

    kind: ScenarioKind
    threshold_bytes: float | None = None

    def __post_init__(self) -> None:
        if self.kind is ScenarioKind.BELOW_BASIC and self.threshold_bytes is not None:
            raise ValidationError("below_basic carries no threshold")


def little_law_concurrency(latency_cycles: float, throughput_bytes_per_cycle: float) -> float:
    """Bytes in flight needed to sustain a throughput at a given latency."""
    if latency_cycles <= 0 or throughput_bytes_per_cycle <= 0:
        raise ValidationError("latency and throughput must be > 0")
    return latency_cycles * throughput_bytes_per_cycle


def prefer_fewer_workers(n_bytes: float, basic: CostPoint, more: CostPoint,
                         sync: SyncCost) -> bool:
    """True when the small configuration strictly beats the big one at size n.

    Both sides share the basic latency; the big side adds the synchronization
    cost. Backlog beyond a configuration's concurrency drains at its
    throughput. Ties resolve to more workers (strict inequality).
    """
    if n_bytes < 0:
        raise ValidationError("input size must be >= 0")
    time_fewer = basic.latency_cycles + max(0.0, n_bytes - basic.concurrency) \
        / basic.throughput_bytes_per_cycle
    time_more = basic.latency_cycles + sync.total_cycles \
        + max(0.0, n_bytes - more.concurrency) / more.throughput_bytes_per_cycle
    return time_fewer < time_more


def switch_point_between(basic: CostPoint, sync: SyncCost,
                         safety_factor: float = 1.0) -> float:
    """Switch point N_m for inputs between the two concurrencies.

    Below this size (and while the input still fits the big configuration's
    concurrency) fewer workers win. ``safety_factor`` optionally inflates the
    reported threshold to absorb pipeline-refill effects; the model itself is
    evaluated at factor 1.
    """
    if safety_factor <= 0:
        raise ValidationError("safety_factor must be > 0")
    return (basic.latency_cycles + sync.total_cycles) \
        * basic.throughput_bytes_per_cycle * safety_factor


def switch_point_above(basic: CostPoint, more: CostPoint, sync: SyncCost,
                       safety_factor: float = 1.0) -> float | None:
    """Switch point N_l for inputs exceeding both concurrencies.

    Returns None when the big configuration has no throughput advantage
    (no crossover: fewer workers win at every size).
    """
    if safety_factor <= 0:
        raise ValidationError("safety_factor must be > 0")
    thr_b = basic.throughput_bytes_per_cycle
    thr_m = more.throughput_bytes_per_cycle
    if thr_m <= thr_b:
        return None
    return sync.total_cycles * thr_m * thr_b / (thr_m - thr_b) * safety_factor


def classify_scenario(n_bytes: float, basic: CostPoint, more: CostPoint,
                      sync: SyncCost | None = None,
                      safety_factor: float = 1.0) -> SwitchScenario:
    """Place an input size relative to the two concurrencies.

    When ``sync`` is given, the returned scenario carries the switch point
    that governs its regime (N_m between the concurrencies, N_l above both).
    """
    if n_bytes < 0:
        raise ValidationError("input size must be >= 0")
    c_basic = basic.concurrency
    c_more = more.concurrency
    if c_basic > c_more:
        raise ValidationError(
            f"basic concurrency {c_basic:g} exceeds more-workers concurrency "
            f"{c_more:g}; configurations look mislabeled")
    if n_bytes <= c_basic:
        return SwitchScenario(ScenarioKind.BELOW_BASIC)
    if n_bytes <= c_more:
        threshold = None if sync is None else switch_point_between(basic, sync, safety_factor)
        return SwitchScenario(ScenarioKind.BETWEEN, threshold)
    threshold = None if sync is None else switch_point_above(basic, more, sync, safety_factor)
    return SwitchScenario(ScenarioKind.ABOVE_MORE, threshold)


def active_warps_per_sm(profile: DeviceProfile, blocks_per_sm: int,
                        threads_per_block: int) -> int:
    """Resident warps per SM for a launch shape, bounded by the device cap."""
    if blocks_per_sm <= 0 or threads_per_block <= 0:
        raise ValidationError("blocks_per_sm and threads_per_block must be >= 1")
    if threads_per_block > profile.max_threads_per_block:
        raise ValidationError(
            f"threads_per_block {threads_per_block} exceeds device cap "
            f"{profile.max_threads_per_block}")
    warps_per_block = math.ceil(threads_per_block / profile.warp_size)
    return min(profile.max_warps_per_sm, blocks_per_sm * warps_per_block)
