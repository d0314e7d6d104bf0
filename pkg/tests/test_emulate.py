"""Emulator: determinism, noiseless identity with the estimators, noise stats."""

import dataclasses
import random

import numpy as np
import pytest

from syncperf.analysis import instruction_latency, launch_overhead
from syncperf.dataio import Provenance, dumps_measurements, loads_measurements
from syncperf.emulate import (
    EmulatedDevice,
    fusion_arm_mean_ns,
    generate_fusion_batch,
    generate_repeatdiff_batch,
    generate_sync_sweep_batch,
)
from syncperf.errors import ValidationError


class TestDeterminism:
    def test_identical_request_gives_identical_bytes(self):
        dev = EmulatedDevice(noise_sigma=75.0, seed=9)
        first = dumps_measurements(generate_fusion_batch(dev, 5, 1, 20))
        second = dumps_measurements(generate_fusion_batch(dev, 5, 1, 20))
        assert first == second

    def test_distinct_seeds_differ_but_agree_in_the_mean(self):
        runs = 100_000
        a = EmulatedDevice(noise_sigma=500.0, seed=1)
        b = EmulatedDevice(noise_sigma=500.0, seed=2)
        batch_a = generate_fusion_batch(a, 5, 1, runs)
        batch_b = generate_fusion_batch(b, 5, 1, runs)
        values_a = np.array([s.value for s in batch_a.experiments[0].arm("ij")])
        values_b = np.array([s.value for s in batch_b.experiments[0].arm("ij")])
        assert not np.array_equal(values_a, values_b)
        standard_error = 500.0 / np.sqrt(runs)
        assert abs(values_a.mean() - values_b.mean()) <= 3 * np.sqrt(2) * standard_error

    def test_hundred_case_fuzz(self):
        rng = random.Random(404)
        for _ in range(100):
            dev = EmulatedDevice(
                launch_overhead_ns=rng.uniform(100, 5000),
                wait_unit_ns=rng.uniform(1000, 50000),
                noise_sigma=rng.choice([0.0, rng.uniform(1, 50)]),
                seed=rng.randint(0, 2 ** 31),
            )
            i, j = rng.randint(1, 10), rng.randint(1, 10)
            runs = rng.randint(1, 6)
            assert dumps_measurements(generate_fusion_batch(dev, i, j, runs)) \
                == dumps_measurements(generate_fusion_batch(dev, i, j, runs))


class TestFusionGeneration:
    def test_noiseless_recovery_of_configured_overhead(self):
        dev = EmulatedDevice(launch_overhead_ns=1081.0, wait_unit_ns=10_000.0)
        batch = generate_fusion_batch(dev, 5, 1, 3)
        assert batch.provenance is Provenance.EMULATOR
        record = batch.experiments[0]
        assert record.arm("ij")[0].value == 55405.0
        assert record.arm("ji")[0].value == 51081.0
        estimate = launch_overhead(record.as_fusion())
        assert estimate.value == pytest.approx(1081.0, rel=1e-12)

    def test_arm_means_follow_closed_form(self):
        dev = EmulatedDevice(launch_overhead_ns=123.0, wait_unit_ns=456.0)
        assert fusion_arm_mean_ns(dev, 7, 3) == 7 * 123.0 + 21 * 456.0

    def test_single_run_batch_valid_without_stddev(self):
        dev = EmulatedDevice()
        est = launch_overhead(generate_fusion_batch(dev, 5, 1, 1)
                              .experiments[0].as_fusion())
        assert est.stddev is None

    def test_round_trips_through_wire_format(self):
        dev = EmulatedDevice(noise_sigma=3.0, seed=77)
        batch = generate_fusion_batch(dev, 4, 2, 5)
        assert loads_measurements(dumps_measurements(batch)) == batch

    def test_bad_request_rejected(self):
        with pytest.raises(ValidationError):
            generate_fusion_batch(EmulatedDevice(), 0, 1, 1)
        with pytest.raises(ValidationError):
            generate_fusion_batch(EmulatedDevice(), 1, 1, 0)


class TestRepeatDiffGeneration:
    def test_recovers_configured_fadd_latency(self):
        dev = EmulatedDevice()  # fadd defaults to 4 cycles
        batch = generate_repeatdiff_batch(dev, "fadd", 1024, 512, 2)
        est = instruction_latency(batch.experiments[0].as_repeatdiff())
        assert est.value == pytest.approx(4.0, rel=1e-12)

    def test_zero_latency_instruction(self):
        dev = EmulatedDevice(instr_latency_cycles={"nop": 0.0})
        batch = generate_repeatdiff_batch(dev, "nop", 64, 32, 1)
        assert instruction_latency(batch.experiments[0].as_repeatdiff()).value == 0.0

    def test_base_shift_leaves_latency_unchanged(self):
        dev = EmulatedDevice()
        low = generate_repeatdiff_batch(dev, "fadd", 1024, 512, 4, base_cycles=100.0)
        high = generate_repeatdiff_batch(dev, "fadd", 1024, 512, 4,
                                         base_cycles=100.0 + 1e6)
        est_low = instruction_latency(low.experiments[0].as_repeatdiff())
        est_high = instruction_latency(high.experiments[0].as_repeatdiff())
        assert est_high.value == pytest.approx(est_low.value, abs=1e-6)

    def test_unknown_instruction_rejected(self):
        with pytest.raises(ValidationError):
            generate_repeatdiff_batch(EmulatedDevice(), "fsub", 64, 32, 1)

    def test_bad_repeat_pair_rejected(self):
        with pytest.raises(ValidationError):
            generate_repeatdiff_batch(EmulatedDevice(), "fadd", 32, 32, 1)


class TestSyncSweepGeneration:
    def test_values_come_from_the_latency_map(self):
        table = {("grid", b, t, 1): float(100 * b + t)
                 for b in (1, 2) for t in (32, 64)}
        dev = EmulatedDevice(sync_latency_cycles=table)
        batch = generate_sync_sweep_batch(dev, "grid", (32, 64), (1, 2), 1, 2)
        assert len(batch.experiments) == 4
        record = batch.experiment("sync-grid-t64-b2-g1")
        assert record.samples[0].value == 264.0
        assert record.spec.params["blocks_per_sm"] == "2"

    def test_missing_map_entry_rejected(self):
        with pytest.raises(ValidationError):
            generate_sync_sweep_batch(EmulatedDevice(), "grid", (32,), (1,), 1, 1)


class TestDeviceValidation:
    def test_negative_parameters_rejected(self):
        with pytest.raises(ValidationError):
            EmulatedDevice(launch_overhead_ns=-1.0)
        with pytest.raises(ValidationError):
            EmulatedDevice(noise_sigma=-0.5)
        with pytest.raises(ValidationError):
            EmulatedDevice(instr_latency_cycles={"fadd": -4.0})

    def test_replace_keeps_validation(self):
        dev = EmulatedDevice()
        with pytest.raises(ValidationError):
            dataclasses.replace(dev, wait_unit_ns=-2.0)
