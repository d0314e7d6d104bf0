"""Wire format round trips, parse errors, report emission, fixture integrity."""

import json
import random

import pytest

from syncperf.analysis import ClockDomain, TimingSample
from syncperf.dataio import (
    CSV_HEADER,
    ExperimentRecord,
    ExperimentSpec,
    MeasurementBatch,
    Provenance,
    Report,
    ReportTable,
    SCHEMA_VERSION,
    dumps_device_profile,
    dumps_measurements,
    emit_report,
    format_number,
    heatmap_table,
    load_device_profile,
    load_measurements,
    loads_device_profile,
    loads_measurements,
    save_device_profile,
    save_measurements,
)
from syncperf.device import DeviceProfile
from syncperf.errors import ParseError, ValidationError
from syncperf import fixtures


def sample(eid, value, run=0, domain=ClockDomain.CPU_NS):
    return TimingSample(eid, domain, value, run)


def fusion_batch():
    spec = ExperimentSpec("fus51", "fusion", {"launches_i": "5", "wait_units_j": "1"})
    record = ExperimentRecord(spec, (
        sample("fus51/ij", 55405.0), sample("fus51/ji", 51081.0)))
    return MeasurementBatch(SCHEMA_VERSION, "V100", Provenance.EMULATOR, (record,))


def random_batch(rng: random.Random) -> MeasurementBatch:
    records = []
    for index in range(rng.randint(1, 4)):
        kind = rng.choice(["fusion", "repeatdiff", "timing"])
        eid = f"e{index}"
        domain = rng.choice(list(ClockDomain))
        if kind == "fusion":
            i, j = rng.randint(1, 9), rng.randint(1, 9)
            spec = ExperimentSpec(eid, kind, {"launches_i": str(i), "wait_units_j": str(j)})
            arms = (f"{eid}/ij", f"{eid}/ji")
        elif kind == "repeatdiff":
            r2 = rng.randint(1, 512)
            spec = ExperimentSpec(eid, kind, {
                "instr": "fadd", "repeats_r1": str(r2 + rng.randint(1, 512)),
                "repeats_r2": str(r2)})
            arms = (f"{eid}/k1", f"{eid}/k2")
        else:
            spec = ExperimentSpec(eid, kind, {"level": "grid"})
            arms = (eid,)
        samples = []
        for arm in arms:
            for run in range(rng.randint(1, 5)):
                value = rng.choice([
                    rng.uniform(0, 1e6),
                    float(rng.randint(0, 10 ** 12)),
                    rng.random() / 3,
                ])
                samples.append(sample(arm, value, run, domain))
        records.append(ExperimentRecord(spec, tuple(samples)))
    provenance = rng.choice(list(Provenance))
    return MeasurementBatch(SCHEMA_VERSION, f"dev{rng.randint(0, 9)}", provenance,
                            tuple(records))


class TestMeasurementRoundTrip:
    def test_writer_output_loads_back(self):
        batch = fusion_batch()
        text = dumps_measurements(batch)
        assert loads_measurements(text) == batch

    def test_file_round_trip(self, tmp_path):
        batch = fusion_batch()
        path = tmp_path / "m.txt"
        save_measurements(batch, path)
        assert load_measurements(path) == batch

    def test_round_trip_is_bit_exact_on_awkward_floats(self):
        values = [0.1, 1 / 3, 1e-17, 123456789.123456789, 2.0 ** 52]
        spec = ExperimentSpec("t", "timing", {})
        record = ExperimentRecord(spec, tuple(
            sample("t", v, run) for run, v in enumerate(values)))
        batch = MeasurementBatch(SCHEMA_VERSION, "d", Provenance.HARDWARE, (record,))
        loaded = load_back = loads_measurements(dumps_measurements(batch))
        for original, loaded_sample in zip(values, load_back.experiments[0].samples):
            assert loaded_sample.value == original
        assert loaded == batch

    def test_hundred_case_fuzz(self):
        rng = random.Random(2718)
        for _ in range(100):
            batch = random_batch(rng)
            text = dumps_measurements(batch)
            again = loads_measurements(text)
            assert again == batch
            assert dumps_measurements(again) == text

    def test_json_alternative_encoding(self):
        batch = fusion_batch()
        payload = {
            "schema_version": 1,
            "device": "V100",
            "provenance": "emulator",
            "experiments": [{
                "id": "fus51",
                "type": "fusion",
                "params": {"launches_i": 5, "wait_units_j": 1},
                "samples": [
                    {"experiment_id": "fus51/ij", "clock_domain": "cpu_ns",
                     "run_index": 0, "value": 55405.0},
                    {"experiment_id": "fus51/ji", "clock_domain": "cpu_ns",
                     "run_index": 0, "value": 51081.0},
                ],
            }],
        }
        assert loads_measurements(json.dumps(payload)) == batch


class TestMeasurementValidation:
    def test_negative_sample_names_the_row(self):
        text = dumps_measurements(fusion_batch()).replace("51081", "-51081")
        with pytest.raises(ParseError) as err:
            loads_measurements(text, path="bad.txt")
        assert "negative value" in str(err.value)
        assert err.value.line == 8  # the offending CSV row

    def test_unknown_schema_version_rejected(self):
        text = dumps_measurements(fusion_batch()).replace(
            "schema_version: 1", "schema_version: 99")
        with pytest.raises(ParseError) as err:
            loads_measurements(text)
        assert "schema_version" in str(err.value)

    def test_unknown_experiment_type_rejected(self):
        text = dumps_measurements(fusion_batch()).replace("type=fusion", "type=warpdance")
        with pytest.raises(ParseError) as err:
            loads_measurements(text)
        assert "unknown experiment type" in str(err.value)

    def test_unresolved_sample_id_rejected(self):
        text = dumps_measurements(fusion_batch()).replace("fus51/ji", "ghost/ji")
        with pytest.raises(ParseError) as err:
            loads_measurements(text)
        assert "resolves to no experiment" in str(err.value)

    def test_mixed_clock_domain_rejected(self):
        text = dumps_measurements(fusion_batch()).replace(
            "fus51/ji,cpu_ns", "fus51/ji,gpu_cycles")
        with pytest.raises(ParseError) as err:
            loads_measurements(text)
        assert "mixes clock domains" in str(err.value)

    def test_missing_separator_rejected(self):
        with pytest.raises(ParseError):
            loads_measurements("schema_version: 1\ndevice: x\nprovenance: hardware\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_measurements(tmp_path / "nope.txt")

    def test_duplicate_experiment_id_rejected(self):
        text = dumps_measurements(fusion_batch())
        line = "experiment: fus51 type=fusion launches_i=5 wait_units_j=1"
        with pytest.raises(ParseError) as err:
            loads_measurements(text.replace(line, line + "\n" + line))
        assert "duplicate experiment id" in str(err.value)

    def test_arm_suffix_enforced(self):
        spec = ExperimentSpec("f", "fusion", {"launches_i": "2", "wait_units_j": "1"})
        with pytest.raises(ValidationError):
            ExperimentRecord(spec, (sample("f/zz", 1.0),))

    def test_wrong_column_count_rejected(self):
        text = dumps_measurements(fusion_batch()) + "fus51/ij,cpu_ns,9\n"
        with pytest.raises(ParseError) as err:
            loads_measurements(text)
        assert "4 CSV columns" in str(err.value)


class TestDeviceProfileIO:
    def test_bundled_v100_values(self, tmp_path):
        path = tmp_path / "v100.profile"
        save_device_profile(fixtures.device_profile("v100"), path)
        profile = load_device_profile(path)
        assert profile.clock_mhz == 1312.0
        assert profile.gpu_count == 8
        assert profile.interconnect.value == "nvlink"

    def test_bundled_p100_values(self):
        profile = loads_device_profile(
            dumps_device_profile(fixtures.device_profile("p100")))
        assert profile.clock_mhz == 1189.0
        assert profile.gpu_count == 2

    def test_round_trip_identity(self):
        for key in ("v100", "p100"):
            profile = fixtures.device_profile(key)
            assert loads_device_profile(dumps_device_profile(profile)) == profile

    def test_zero_warp_size_rejected(self):
        text = dumps_device_profile(fixtures.device_profile("v100")).replace(
            "warp_size=32", "warp_size=0")
        with pytest.raises(ValidationError):
            loads_device_profile(text)

    def test_unknown_key_rejected(self):
        text = dumps_device_profile(fixtures.device_profile("v100")) + "bogus=1\n"
        with pytest.raises(ParseError):
            loads_device_profile(text)

    def test_missing_key_rejected(self):
        with pytest.raises(ParseError) as err:
            loads_device_profile("name=x\n")
        assert "missing device profile keys" in str(err.value)


class TestReportEmission:
    def test_switch_point_tsv_golden(self):
        from syncperf.cli import switch_point_report
        payload = emit_report(switch_point_report(["v100"]), "tsv")
        assert payload == (
            b"scenery\tlabel\tsync_cycles\tN_l\tN_m\n"
            b"1\t1 warp\t110\t70.4278\t76.26\n"
            b"2\t1024 thrd\t420\t9057.73\t8486.8\n"
        )

    def test_empty_report_is_header_only(self):
        table = ReportTable("empty", ("a", "b"), ())
        assert emit_report(Report("empty", (table,)), "tsv") == b"a\tb\n"

    def test_deterministic_bytes(self):
        from syncperf.cli import switch_point_report
        report = switch_point_report(["v100", "p100"])
        assert emit_report(report, "tsv") == emit_report(report, "tsv")
        assert emit_report(report, "structured") == emit_report(report, "structured")

    def test_structured_parses_and_rounds_to_six_digits(self):
        table = ReportTable("t", ("x",), ((1.23456789,),))
        payload = json.loads(emit_report(Report("r", (table,)), "structured"))
        assert payload["tables"][0]["rows"][0][0] == 1.23457

    def test_multi_table_tsv_sections(self):
        report = Report("r", (
            ReportTable("one", ("a",), ((1,),)),
            ReportTable("two", ("b",), ((2,),)),
        ))
        assert emit_report(report, "tsv") == b"# one\na\n1\n\n# two\nb\n2\n"

    def test_heatmap_row_major_shape(self):
        table = heatmap_table("h", "threads_per_block", [32, 64], [1, 2],
                              {(32, 1): 1.0, (32, 2): 2.0, (64, 1): 3.0})
        assert table.columns == ("threads_per_block", "1", "2")
        assert table.rows == ((32, 1.0, 2.0), (64, 3.0, None))
        assert emit_report(Report("h", (table,)), "tsv") == (
            b"threads_per_block\t1\t2\n32\t1\t2\n64\t3\t\n")

    def test_format_number(self):
        assert format_number(None) == ""
        assert format_number(70.42781875658587) == "70.4278"
        assert format_number(1081.0) == "1081"
        assert format_number(12) == "12"
        assert format_number(True) == "true"

    def test_ragged_rows_rejected(self):
        with pytest.raises(ValidationError):
            ReportTable("bad", ("a", "b"), ((1,),))


class TestFixtureIntegrity:
    def test_block_sync_latencies_match_published(self):
        rows = {r.sync_type: r for r in fixtures.WARP_SYNC_T2}
        assert rows["block_warp"].latency_v100_cycles == 22.0
        assert rows["block_warp"].latency_p100_cycles == 218.0
        assert rows["block_warp"].throughput_v100_per_cycle == 0.475

    def test_launch_overheads_match_published(self):
        by_type = {r.launch_type: r for r in fixtures.LAUNCH_OVERHEAD_T1}
        assert by_type["traditional"].overhead_ns == 1081.0
        assert by_type["cooperative"].overhead_ns == 1063.0
        assert by_type["cooperative_multi_device"].overhead_ns == 1258.0
        assert by_type["cooperative"].null_kernel_total_ns == 10248.0

    def test_switch_point_sync_totals(self):
        totals = {(r.scenery, r.kind): (r.sync_v100_cycles, r.sync_p100_cycles)
                  for r in fixtures.SWITCH_POINTS_T4}
        assert totals[(1, "N_l")] == (110.0, 155.0)
        assert totals[(2, "N_l")] == (420.0, 2135.0)

    def test_fingerprint_matches_pinned_digest(self):
        assert fixtures.fingerprint() == fixtures.FINGERPRINT

    def test_every_table_exports_as_report_table(self):
        for table_id in fixtures.TableId:
            table = fixtures.fixture_table(table_id).to_report_table()
            assert table.rows
            emit_report(Report("fixture", (table,)), "tsv")

    def test_scenery_specs_carry_explicit_invocation_counts(self):
        for key in fixtures.DEVICE_KEYS:
            for spec in fixtures.scenery_specs(key):
                assert spec.sync.per_invocation_count == 5
