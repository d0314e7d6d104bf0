"""Estimators that turn raw timing samples into derived quantities.

All three core estimators are difference quotients: two measurement arms that
share every cost except the one under study, so constant offsets (launch
setup, timer overhead) cancel. Uncertainty propagates through the difference
as sqrt(s1^2 + s2^2) / |delta|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import ValidationError

SATURATION_1GPU_NS = 5_000.0
SATURATION_8GPU_NS = 250_000.0


class ClockDomain(Enum):
    CPU_NS = "cpu_ns"
    GPU_CYCLES = "gpu_cycles"


@dataclass(frozen=True)
class TimingSample:
    """One timed observation, in its clock's native unit."""

    experiment_id: str
    clock_domain: ClockDomain
    value: float
    run_index: int = 0

    def __post_init__(self) -> None:
        if self.value < 0:
            raise ValidationError(
                f"sample {self.experiment_id!r} run {self.run_index}: "
                f"negative value {self.value!r}")


def _values(samples: Sequence[TimingSample]) -> list[float]:
    if not samples:
        raise ValidationError("sample set is empty")
    domains = {s.clock_domain for s in samples}
    if len(domains) > 1:
        raise ValidationError("mixed clock domains within one experiment arm")
    return [s.value for s in samples]


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _sample_stddev(values: Sequence[float]) -> float | None:
    """(N-1)-denominator standard deviation; None below two samples."""
    n = len(values)
    if n < 2:
        return None
    mu = _mean(values)
    return math.sqrt(sum((v - mu) ** 2 for v in values) / (n - 1))


def _reduce_arm(values: Sequence[float], reducer: str) -> float:
    if reducer == "mean":
        return _mean(values)
    if reducer == "min":
        # Fastest-result rule for unstable warp-level measurements.
        return min(values)
    raise ValidationError(f"unknown reducer {reducer!r}")


@dataclass(frozen=True)
class DifferenceEstimate:
    """Result of a two-arm difference estimator.

    ``stddev`` propagates the per-arm sample stddevs (single-measurement
    uncertainty); ``stderr`` propagates standard errors of the arm means and
    is the uncertainty of ``value`` itself. Negative estimates are kept and
    flagged rather than clamped.
    """

    value: float
    stddev: float | None
    stderr: float | None
    arm_stddev: tuple[float | None, float | None]
    arm_sizes: tuple[int, int]
    noise_dominated: bool = False


def _difference_estimate(values_hi: Sequence[float], values_lo: Sequence[float],
                         divisor: float, reducer: str = "mean") -> DifferenceEstimate:
    point = (_reduce_arm(values_hi, reducer) - _reduce_arm(values_lo, reducer)) / divisor
    s_hi = _sample_stddev(values_hi)
    s_lo = _sample_stddev(values_lo)
    stddev = stderr = None
    if s_hi is not None and s_lo is not None:
        stddev = math.sqrt(s_hi ** 2 + s_lo ** 2) / abs(divisor)
        stderr = math.sqrt(s_hi ** 2 / len(values_hi) + s_lo ** 2 / len(values_lo)) \
            / abs(divisor)
    return DifferenceEstimate(
        value=point,
        stddev=stddev,
        stderr=stderr,
        arm_stddev=(s_hi, s_lo),
        arm_sizes=(len(values_hi), len(values_lo)),
        noise_dominated=point < 0,
    )


@dataclass(frozen=True)
class FusionExperiment:
    """Mirrored launch-count / wait-unit arms for overhead extraction.

    Arm ij launches i kernels of j wait units each; arm ji mirrors it. Kernel
    work cancels in the difference (i*j wait units on both sides), leaving
    (i - j) launch overheads.
    """

    launches_i: int
    wait_units_j: int
    samples_ij: tuple[TimingSample, ...]
    samples_ji: tuple[TimingSample, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples_ij", tuple(self.samples_ij))
        object.__setattr__(self, "samples_ji", tuple(self.samples_ji))
        if self.launches_i < 1 or self.wait_units_j < 1:
            raise ValidationError("launch and wait-unit counts must be >= 1")
        if not self.samples_ij or not self.samples_ji:
            raise ValidationError("both fusion arms need at least one sample")


@dataclass(frozen=True)
class RepeatDiffExperiment:
    """Two kernels identical except for the repeat count of one instruction."""

    repeats_r1: int
    repeats_r2: int
    samples_k1: tuple[TimingSample, ...]
    samples_k2: tuple[TimingSample, ...]
    instruction: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples_k1", tuple(self.samples_k1))
        object.__setattr__(self, "samples_k2", tuple(self.samples_k2))
        if self.repeats_r2 < 1:
            raise ValidationError("repeat counts must be >= 1")
        if self.repeats_r1 <= self.repeats_r2:
            raise ValidationError("repeats_r1 must exceed repeats_r2")
        if not self.samples_k1 or not self.samples_k2:
            raise ValidationError("both repeat arms need at least one sample")


def kernel_total_latency(t1: float, t2: float, t3: float,
                         reps_a: int, reps_b: int) -> float:
    """Per-kernel total latency from back-to-back repeat segments.

    Segment (t2-t1) covers reps_a launches and (t3-t2) covers reps_b; the
    difference sheds whatever constant cost both segments share.
    """
    if not (t1 <= t2 <= t3):
        raise ValidationError("timestamps must be non-decreasing")
    if reps_a < 1:
        raise ValidationError("reps_a must be >= 1")
    if reps_b <= reps_a:
        raise ValidationError("reps_b must exceed reps_a (degenerate divisor)")
    return ((t3 - t2) - (t2 - t1)) / (reps_b - reps_a)


def launch_overhead(exp: FusionExperiment, reducer: str = "mean") -> DifferenceEstimate:
    """Launch overhead via kernel fusion: (mean_ij - mean_ji) / (i - j)."""
    if exp.launches_i == exp.wait_units_j:
        raise ValidationError(
            f"degenerate design: i = j = {exp.launches_i} leaves nothing to difference")
    values_ij = _values(exp.samples_ij)
    values_ji = _values(exp.samples_ji)
    return _difference_estimate(values_ij, values_ji,
                                exp.launches_i - exp.wait_units_j, reducer)


def instruction_latency(exp: RepeatDiffExperiment, reducer: str = "mean") -> DifferenceEstimate:
    """Per-instruction latency via repeat differencing: (L_k1 - L_k2) / (r1 - r2)."""
    values_k1 = _values(exp.samples_k1)
    values_k2 = _values(exp.samples_k2)
    return _difference_estimate(values_k1, values_k2,
                                exp.repeats_r1 - exp.repeats_r2, reducer)


def peak_throughput(sweep: Sequence[tuple[tuple[int, ...], float]]) -> tuple[tuple[int, ...], float]:
    """Highest-throughput entry of a sweep.

    Ties break toward the fewest total threads (product of the config tuple),
    then the lexicographically smallest config, so saturated plateaus resolve
    deterministically.
    """
    if not sweep:
        raise ValidationError("empty sweep")

    def sort_key(entry: tuple[tuple[int, ...], float]):
        config, throughput = entry
        return (-throughput, math.prod(config), config)

    config, throughput = min(sweep, key=sort_key)
    return config, throughput


def saturation_threshold_ns(gpu_count: int) -> float:
    """Minimum kernel execution latency for a trustworthy overhead estimate.

    Linear between 5 us at one GPU and 250 us at eight.
    """
    if gpu_count < 1:
        raise ValidationError("gpu_count must be >= 1")
    slope = (SATURATION_8GPU_NS - SATURATION_1GPU_NS) / 7.0
    return SATURATION_1GPU_NS + slope * (gpu_count - 1)


def saturation_check(kernel_exec_latency_ns: float, gpu_count: int) -> bool:
    """True when the kernel is long enough to saturate the launch pipeline."""
    if kernel_exec_latency_ns < 0:
        raise ValidationError("latency must be >= 0")
    return kernel_exec_latency_ns >= saturation_threshold_ns(gpu_count)
