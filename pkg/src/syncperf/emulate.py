"""Synthetic measurement generator backed by closed-form timing models.

Every analysis path stays testable end to end without hardware: launch
sequences cost launches x overhead + launches x wait_units x wait_unit;
repeat kernels cost base + repeats x instruction latency; sync sweeps read a
latency map. Gaussian noise is applied per aggregate arm measurement, the
point where a real harness reads its timer.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .analysis import ClockDomain, TimingSample
from .dataio import (
    ExperimentRecord,
    ExperimentSpec,
    MeasurementBatch,
    Provenance,
    SCHEMA_VERSION,
)
from .errors import ValidationError

SyncKey = tuple[str, int, int, int]  # (level, blocks_per_sm, threads_per_block, gpu_count)


@dataclass(frozen=True)
class EmulatedDevice:
    """Timing parameters for the synthetic device; deterministic per seed."""

    launch_overhead_ns: float = 1081.0
    wait_unit_ns: float = 10_000.0
    instr_latency_cycles: Mapping[str, float] = field(
        default_factory=lambda: {"fadd": 4.0})
    sync_latency_cycles: Mapping[SyncKey, float] = field(default_factory=dict)
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "instr_latency_cycles", dict(self.instr_latency_cycles))
        object.__setattr__(self, "sync_latency_cycles", dict(self.sync_latency_cycles))
        if self.launch_overhead_ns < 0 or self.wait_unit_ns < 0:
            raise ValidationError("emulated latencies must be >= 0")
        if any(v < 0 for v in self.instr_latency_cycles.values()):
            raise ValidationError("instruction latencies must be >= 0")
        if any(v < 0 for v in self.sync_latency_cycles.values()):
            raise ValidationError("sync latencies must be >= 0")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")


def _rng(dev: EmulatedDevice, *tag: object) -> np.random.Generator:
    entropy = [dev.seed & 0xFFFFFFFF]
    for part in tag:
        if isinstance(part, str):
            entropy.append(zlib.crc32(part.encode("utf-8")))
        else:
            entropy.append(int(part) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _arm_samples(rng: np.random.Generator, arm_id: str, mean: float, sigma: float,
                 runs: int, domain: ClockDomain) -> tuple[TimingSample, ...]:
    values = mean + (rng.normal(0.0, sigma, size=runs) if sigma > 0 else np.zeros(runs))
    return tuple(
        TimingSample(arm_id, domain, float(v), run_index=k)
        for k, v in enumerate(values))


def fusion_arm_mean_ns(dev: EmulatedDevice, launches: int, wait_units: int) -> float:
    """Closed-form arm total: launches x (overhead + wait_units x wait_unit)."""
    return launches * dev.launch_overhead_ns \
        + launches * wait_units * dev.wait_unit_ns


def generate_fusion_batch(dev: EmulatedDevice, i: int, j: int, runs: int,
                          device_name: str = "emulated") -> MeasurementBatch:
    """Mirrored (i launches, j wait units) / (j, i) arms, `runs` samples each."""
    if i < 1 or j < 1 or runs < 1:
        raise ValidationError("i, j and runs must be >= 1")
    experiment_id = f"fusion-{i}-{j}"
    rng = _rng(dev, "fusion", i, j, runs)
    samples = _arm_samples(rng, f"{experiment_id}/ij", fusion_arm_mean_ns(dev, i, j),
                           dev.noise_sigma, runs, ClockDomain.CPU_NS)
    samples += _arm_samples(rng, f"{experiment_id}/ji", fusion_arm_mean_ns(dev, j, i),
                            dev.noise_sigma, runs, ClockDomain.CPU_NS)
    spec = ExperimentSpec(experiment_id, "fusion",
                          {"launches_i": str(i), "wait_units_j": str(j)})
    return MeasurementBatch(SCHEMA_VERSION, device_name, Provenance.EMULATOR,
                            (ExperimentRecord(spec, samples),))


def generate_repeatdiff_batch(dev: EmulatedDevice, instr_label: str, r1: int, r2: int,
                              runs: int, base_cycles: float = 5000.0,
                              device_name: str = "emulated") -> MeasurementBatch:
    """Two kernels differing only in repeat count of one instruction.

    The base cost is shared by both arms (it cancels in the difference);
    shifting it must not move the recovered latency.
    """
    if instr_label not in dev.instr_latency_cycles:
        raise ValidationError(f"unknown instruction label {instr_label!r}")
    if r2 < 1 or r1 <= r2:
        raise ValidationError("need r1 > r2 >= 1")
    if runs < 1:
        raise ValidationError("runs must be >= 1")
    latency = dev.instr_latency_cycles[instr_label]
    experiment_id = f"repeatdiff-{instr_label}-{r1}-{r2}"
    rng = _rng(dev, "repeatdiff", instr_label, r1, r2, runs)
    samples = _arm_samples(rng, f"{experiment_id}/k1", base_cycles + r1 * latency,
                           dev.noise_sigma, runs, ClockDomain.GPU_CYCLES)
    samples += _arm_samples(rng, f"{experiment_id}/k2", base_cycles + r2 * latency,
                            dev.noise_sigma, runs, ClockDomain.GPU_CYCLES)
    spec = ExperimentSpec(experiment_id, "repeatdiff",
                          {"instr": instr_label, "repeats_r1": str(r1),
                           "repeats_r2": str(r2)})
    return MeasurementBatch(SCHEMA_VERSION, device_name, Provenance.EMULATOR,
                            (ExperimentRecord(spec, samples),))


def generate_sync_sweep_batch(dev: EmulatedDevice, level: str,
                              threads_per_block: tuple[int, ...],
                              blocks_per_sm: tuple[int, ...],
                              gpu_count: int, runs: int,
                              device_name: str = "emulated") -> MeasurementBatch:
    """One timing experiment per sweep point, values from the sync map."""
    if runs < 1 or gpu_count < 1:
        raise ValidationError("runs and gpu_count must be >= 1")
    records = []
    for threads in threads_per_block:
        for blocks in blocks_per_sm:
            key = (level, blocks, threads, gpu_count)
            if key not in dev.sync_latency_cycles:
                raise ValidationError(f"no sync latency configured for {key!r}")
            experiment_id = f"sync-{level}-t{threads}-b{blocks}-g{gpu_count}"
            rng = _rng(dev, "sync", level, threads, blocks, gpu_count, runs)
            samples = _arm_samples(rng, experiment_id, dev.sync_latency_cycles[key],
                                   dev.noise_sigma, runs, ClockDomain.GPU_CYCLES)
            spec = ExperimentSpec(experiment_id, "timing", {
                "level": level,
                "threads_per_block": str(threads),
                "blocks_per_sm": str(blocks),
                "gpu_count": str(gpu_count),
            })
            records.append(ExperimentRecord(spec, samples))
    if not records:
        raise ValidationError("empty sweep request")
    return MeasurementBatch(SCHEMA_VERSION, device_name, Provenance.EMULATOR,
                            tuple(records))
