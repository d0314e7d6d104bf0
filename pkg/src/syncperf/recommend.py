"""Recommenders: worker granularity for reductions, barrier mechanism choice."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .device import DeviceProfile
from .errors import ValidationError
from .model import (
    CostPoint,
    SwitchScenario,
    SyncCost,
    active_warps_per_sm,
    classify_scenario,
    prefer_fewer_workers,
    switch_point_above,
    switch_point_between,
)

MULTI_GRID_MAX_BLOCKS_PER_SM = 8
MULTI_GRID_MAX_WARPS_PER_SM = 32

BARRIER_MECHANISMS = ("implicit_launch", "cpu_side", "grid", "multi_grid")

DEFAULT_SLACK_FACTOR = 3.0


@dataclass(frozen=True)
class ReductionQuery:
    """A reduction of ``input_bytes`` and the candidate worker configurations.

    Candidates are ordered by increasing worker count; each carries the
    synchronization cost its granularity pays (zero-cost for a candidate that
    needs no barrier, e.g. a single thread).
    """

    input_bytes: float
    element_bytes: int
    device: DeviceProfile
    candidates: tuple[tuple[CostPoint, SyncCost], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if self.input_bytes < 0:
            raise ValidationError("input_bytes must be >= 0")
        if self.element_bytes <= 0:
            raise ValidationError("element_bytes must be positive")
        if len(self.candidates) < 2:
            raise ValidationError("need at least two candidate configurations")
        concurrencies = [point.concurrency for point, _ in self.candidates]
        for smaller, larger in zip(concurrencies, concurrencies[1:]):
            if larger < smaller:
                raise ValidationError(
                    "candidate concurrency decreases with worker count; "
                    "configurations look mislabeled")


@dataclass(frozen=True)
class ReductionRecommendation:
    chosen: str
    scenario: SwitchScenario
    n_m: float | None
    n_l: float | None
    rationale: str


def recommend_reduction_config(query: ReductionQuery,
                               safety_factor: float = 1.0) -> ReductionRecommendation:
    """Pick the worker granularity that minimizes modeled time.

    Walks the candidate ladder pairwise: advance to the bigger neighbor while
    it beats the smaller one, stop at the first rung where fewer workers win.
    Assumes cost monotonicity between adjacent candidates.
    """
    n = query.input_bytes
    index = 0
    while index + 1 < len(query.candidates):
        basic, _ = query.candidates[index]
        more, sync_more = query.candidates[index + 1]
        if prefer_fewer_workers(n, basic, more, sync_more):
            break
        index += 1

    # Scenario report against the decisive pair (the chosen rung and its
    # bigger neighbor when one exists, else the last rung climbed).
    if index + 1 < len(query.candidates):
        basic, _ = query.candidates[index]
        more, sync = query.candidates[index + 1]
    else:
        basic, _ = query.candidates[-2]
        more, sync = query.candidates[-1]
    scenario = classify_scenario(n, basic, more, sync, safety_factor)
    n_m = switch_point_between(basic, sync, safety_factor)
    n_l = switch_point_above(basic, more, sync, safety_factor)
    chosen_label = query.candidates[index][0].label
    elements = int(n // query.element_bytes)
    rationale = (
        f"{n:g} B ({elements} x {query.element_bytes} B) is {scenario.kind.value} "
        f"relative to {basic.label!r} (C={basic.concurrency:.6g} B) and "
        f"{more.label!r} (C={more.concurrency:.6g} B); "
        f"N_m={n_m:.6g} B, N_l={'none' if n_l is None else format(n_l, '.6g')} B; "
        f"choose {chosen_label!r}")
    return ReductionRecommendation(chosen_label, scenario, n_m, n_l, rationale)


def multi_grid_config_ok(profile: DeviceProfile, blocks_per_sm: int,
                         threads_per_block: int) -> bool:
    """Whether a launch shape keeps multi-GPU barrier latency acceptable."""
    if blocks_per_sm > MULTI_GRID_MAX_BLOCKS_PER_SM:
        return False
    warps = active_warps_per_sm(profile, blocks_per_sm, threads_per_block)
    return warps <= MULTI_GRID_MAX_WARPS_PER_SM


@dataclass(frozen=True)
class MechanismCost:
    """Barrier cost data for one mechanism: per-barrier latency by GPU count
    plus a one-time launch overhead (cooperative launches pay it once)."""

    mechanism: str
    per_barrier_ns: Mapping[int, float]
    one_time_ns: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_barrier_ns", dict(self.per_barrier_ns))
        if self.mechanism not in BARRIER_MECHANISMS:
            raise ValidationError(f"unknown barrier mechanism {self.mechanism!r}")
        if self.one_time_ns < 0 or any(v < 0 for v in self.per_barrier_ns.values()):
            raise ValidationError("barrier costs must be >= 0")


@dataclass(frozen=True)
class BarrierCostTable:
    mechanisms: tuple[MechanismCost, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "mechanisms", tuple(self.mechanisms))

    def get(self, mechanism: str) -> MechanismCost | None:
        for m in self.mechanisms:
            if m.mechanism == mechanism:
                return m
        return None


@dataclass(frozen=True)
class BarrierRecommendation:
    chosen: str | None
    total_ns: Mapping[str, float] = field(default_factory=dict)
    per_iteration_ns: Mapping[str, float] = field(default_factory=dict)
    margins_ns: Mapping[str, float] = field(default_factory=dict)
    within_slack: tuple[str, ...] = ()
    missing: tuple[str, ...] = ()
    rationale: str = ""


def recommend_barrier(iterations: int, gpu_count: int, sync_table: BarrierCostTable,
                      slack_factor: float = DEFAULT_SLACK_FACTOR,
                      mechanisms: Sequence[str] | None = None) -> BarrierRecommendation:
    """Lowest total-cost barrier mechanism for a GPU count and iteration count.

    Total cost = per-barrier latency x iterations + one-time launch overhead.
    Reported margins use the steady-state per-barrier cost (one-time
    excluded); a mechanism whose steady cost stays within ``slack_factor`` of
    the winner's is flagged as an acceptable programmability trade.
    """
    if iterations < 1 or gpu_count < 1:
        raise ValidationError("iterations and gpu_count must be >= 1")
    if slack_factor <= 0:
        raise ValidationError("slack_factor must be > 0")
    requested = tuple(mechanisms) if mechanisms is not None else BARRIER_MECHANISMS
    for name in requested:
        if name not in BARRIER_MECHANISMS:
            raise ValidationError(f"unknown barrier mechanism {name!r}")

    totals: dict[str, float] = {}
    per_iteration: dict[str, float] = {}
    missing: list[str] = []
    for name in requested:
        cost = sync_table.get(name)
        per_barrier = None if cost is None else cost.per_barrier_ns.get(gpu_count)
        if per_barrier is None:
            if mechanisms is not None:
                missing.append(name)
            continue
        per_iteration[name] = per_barrier
        totals[name] = per_barrier * iterations + cost.one_time_ns

    if missing or not totals:
        absent = tuple(missing) if missing else requested
        return BarrierRecommendation(
            chosen=None,
            missing=absent,
            rationale="insufficient data for: " + ", ".join(absent))

    chosen = min(totals, key=lambda name: (totals[name], name))
    margins = {name: per_iteration[name] - per_iteration[chosen]
               for name in totals if name != chosen}
    within = tuple(
        name for name in sorted(totals)
        if name != chosen
        and per_iteration[name] <= slack_factor * per_iteration[chosen])
    parts = [
        f"{chosen} wins at {gpu_count} GPU(s) x {iterations} iteration(s): "
        + ", ".join(f"{name}={totals[name]:.6g} ns" for name in sorted(totals))
    ]
    for name in sorted(margins):
        parts.append(f"{name} trails by {margins[name]:.6g} ns per iteration")
    if "multi_grid" in within:
        parts.append(
            f"multi_grid stays within {slack_factor:g}x of the winner; its "
            f"programmability may justify the minor cost")
    return BarrierRecommendation(
        chosen=chosen,
        total_ns=totals,
        per_iteration_ns=per_iteration,
        margins_ns=margins,
        within_slack=within,
        rationale="; ".join(parts),
    )
