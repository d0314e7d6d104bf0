"""Command-line interface: analyze, predict, recommend, emit-plot, emulate, validate.

Exit status 0 on success, 1 on validation/data errors, 2 on usage errors.
Errors go to stderr with a machine-readable ``error[CODE]:`` prefix. Output
for identical argv and inputs is byte-identical.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from . import fixtures
from .analysis import instruction_latency, launch_overhead, saturation_check
from .dataio import (
    MeasurementBatch,
    Report,
    ReportTable,
    emit_report,
    format_number,
    heatmap_table,
    load_device_profile,
    load_measurements,
    save_measurements,
)
from .device import DeviceProfile
from .emulate import (
    EmulatedDevice,
    generate_fusion_batch,
    generate_repeatdiff_batch,
    generate_sync_sweep_batch,
)
from .errors import ParseError, SyncperfError, ValidationError
from .model import CostPoint, SyncCost, SyncLevel, switch_point_above, switch_point_between
from .recommend import (
    BarrierCostTable,
    ReductionQuery,
    recommend_barrier,
    recommend_reduction_config,
)

SWITCH_TOLERANCE = 0.015
CONCURRENCY_TOLERANCE = 0.02


def switch_point_rows(device_key: str, safety_factor: float = 1.0,
                      sceneries: Sequence[int] | None = None):
    """(scenery, label, sync_total_cycles, N_l, N_m) per bundled scenery."""
    rows = []
    for spec in fixtures.scenery_specs(device_key):
        if sceneries is not None and spec.scenery not in sceneries:
            continue
        n_l = switch_point_above(spec.basic, spec.more, spec.sync, safety_factor)
        n_m = switch_point_between(spec.basic, spec.sync, safety_factor)
        rows.append((spec.scenery, spec.more.label, spec.sync.total_cycles, n_l, n_m))
    return rows


def switch_point_report(device_keys: Sequence[str], safety_factor: float = 1.0,
                        sceneries: Sequence[int] | None = None) -> Report:
    columns = ("scenery", "label", "sync_cycles", "N_l", "N_m")
    tables = []
    for key in device_keys:
        rows = switch_point_rows(key, safety_factor, sceneries)
        tables.append(ReportTable(f"switch_points_{key}", columns, tuple(rows)))
    return Report("switch_points", tuple(tables))


def _parse_cost_table(path: str):
    """Custom prediction input: one comparison per line.

    Columns: scenery,basic_label,basic_latency_cycles,basic_throughput,
    more_label,more_throughput,sync_total_cycles
    """
    header = ("scenery,basic_label,basic_latency_cycles,basic_throughput,"
              "more_label,more_throughput,sync_total_cycles")
    p = Path(path)
    if not p.exists():
        raise ParseError("file does not exist", path=path)
    lines = [ln.strip() for ln in p.read_text(encoding="utf-8").splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0].replace("\t", ",") != header:
        raise ParseError(f"expected header {header!r}", path=path, line=1)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.replace("\t", ",").split(",")
        if len(cells) != 7:
            raise ParseError(f"expected 7 columns, got {len(cells)}", path=path, line=lineno)
        try:
            scenery = int(cells[0])
            basic = CostPoint(cells[1], float(cells[2]), float(cells[3]))
            more = CostPoint(cells[4], float(cells[2]), float(cells[5]))
            sync = SyncCost(SyncLevel.BLOCK, float(cells[6]), 1)
        except (ValueError, ValidationError) as exc:
            raise ParseError(f"bad cost row: {exc}", path=path, line=lineno)
        rows.append((scenery, basic, more, sync))
    return rows


def analyze_report(batches: Sequence[tuple[str, MeasurementBatch]], reducer: str,
                   profile: DeviceProfile | None) -> Report:
    columns = ("source", "experiment", "kind", "metric", "unit", "value",
               "stddev", "stderr", "n1", "n2", "flags")
    rows = []
    gpu_count = profile.gpu_count if profile is not None else 1
    for source, batch in batches:
        for record in batch.experiments:
            spec = record.spec
            if not record.samples:
                raise ValidationError(f"experiment {spec.experiment_id!r} has no samples")
            unit = "ns" if record.samples[0].clock_domain.value == "cpu_ns" else "cycles"
            if spec.kind == "fusion":
                exp = record.as_fusion()
                estimate = launch_overhead(exp, reducer)
                flags = []
                if estimate.noise_dominated:
                    flags.append("noise_dominated")
                mean_ij = sum(s.value for s in exp.samples_ij) / len(exp.samples_ij)
                exec_per_kernel = mean_ij / exp.launches_i - estimate.value
                if unit == "ns" and not saturation_check(max(exec_per_kernel, 0.0), gpu_count):
                    flags.append("unsaturated")
                rows.append((source, spec.experiment_id, spec.kind, "launch_overhead",
                             unit, estimate.value, estimate.stddev, estimate.stderr,
                             estimate.arm_sizes[0], estimate.arm_sizes[1],
                             "+".join(flags)))
            elif spec.kind == "repeatdiff":
                estimate = instruction_latency(record.as_repeatdiff(), reducer)
                flags = "noise_dominated" if estimate.noise_dominated else ""
                metric = "instruction_latency"
                if spec.params.get("instr"):
                    metric += f"[{spec.params['instr']}]"
                rows.append((source, spec.experiment_id, spec.kind, metric, unit,
                             estimate.value, estimate.stddev, estimate.stderr,
                             estimate.arm_sizes[0], estimate.arm_sizes[1], flags))
            else:
                values = [s.value for s in record.samples]
                n = len(values)
                mean = sum(values) / n
                if n >= 2:
                    var = sum((v - mean) ** 2 for v in values) / (n - 1)
                    std = var ** 0.5
                    stderr = std / n ** 0.5
                else:
                    std = stderr = None
                value = mean if reducer == "mean" else min(values)
                rows.append((source, spec.experiment_id, spec.kind, f"timing[{reducer}]",
                             unit, value, std, stderr, n, None, ""))
    return Report("analysis", (ReportTable("estimates", columns, tuple(rows)),))


def validate_lines() -> tuple[list[str], bool]:
    """Recompute bundled switch points and concurrency, diff against stored."""
    lines = []
    ok = True
    switch_pass = switch_total = 0
    for key in fixtures.DEVICE_KEYS:
        for spec in fixtures.scenery_specs(key):
            n_l = switch_point_above(spec.basic, spec.more, spec.sync)
            n_m = switch_point_between(spec.basic, spec.sync)
            for kind, computed in (("N_l", n_l), ("N_m", n_m)):
                published = next(
                    getattr(r, f"switch_{key}_bytes") for r in fixtures.SWITCH_POINTS_T4
                    if r.scenery == spec.scenery and r.kind == kind)
                rounded = round(computed)
                rel = abs(rounded - published) / published
                passed = rel <= SWITCH_TOLERANCE
                switch_total += 1
                switch_pass += passed
                ok &= passed
                lines.append(
                    f"switch point {key} scenery {spec.scenery} {kind}: computed "
                    f"{rounded} ({format_number(computed)}) vs published "
                    f"{format_number(published)}: {rel * 100:.2f}% "
                    f"{'PASS' if passed else 'FAIL'}")
    conc_pass = conc_total = 0
    for key in fixtures.DEVICE_KEYS:
        for row in fixtures.CONCURRENCY_T3:
            latency = getattr(row, f"latency_{key}_cycles")
            throughput = getattr(row, f"bandwidth_{key}_bytes_per_cycle")
            published = getattr(row, f"concurrency_{key}_bytes")
            computed = latency * throughput
            rel = abs(computed - published) / published
            passed = rel <= CONCURRENCY_TOLERANCE
            conc_total += 1
            conc_pass += passed
            ok &= passed
            lines.append(
                f"concurrency {key} scenery {row.scenery} {row.label!r}: computed "
                f"{format_number(computed)} vs published {format_number(published)}: "
                f"{rel * 100:.2f}% {'PASS' if passed else 'FAIL'}")
    lines.append(f"{switch_pass}/{switch_total} switch points within "
                 f"{SWITCH_TOLERANCE * 100:.1f}%")
    lines.append(f"{conc_pass}/{conc_total} concurrency values within "
                 f"{CONCURRENCY_TOLERANCE * 100:.1f}%")
    if fixtures.FINGERPRINT and fixtures.fingerprint() != fixtures.FINGERPRINT:
        lines.append("fixture fingerprint MISMATCH")
        ok = False
    else:
        lines.append("fixture fingerprint OK")
    return lines, ok


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error[E_USAGE]: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="syncperf",
        description="GPU synchronization cost modeling and micro-benchmark analysis",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_output_options(p):
        p.add_argument("--out", help="write the machine-readable report to this path")
        p.add_argument("--format", choices=("tsv", "structured"), default=None,
                       help="machine format (to --out, or stdout when no --out)")

    p = sub.add_parser("analyze", help="turn measurement files into estimates")
    p.add_argument("--measurements", action="append", required=True,
                   help="measurement file (repeatable)")
    p.add_argument("--device", help="device profile file (clock, GPU count)")
    p.add_argument("--reducer", choices=("mean", "min"), default="mean",
                   help="per-arm aggregation; min implements the fastest-result rule")
    add_output_options(p)

    p = sub.add_parser("predict", help="compute switch points N_m / N_l")
    p.add_argument("--fixtures", choices=(*fixtures.DEVICE_KEYS, "all"),
                   help="bundled device data to predict from")
    p.add_argument("--table", help="custom cost table file (see docs)")
    p.add_argument("--scenery", choices=("1", "2", "all"), default="all")
    p.add_argument("--safety-factor", type=float, default=1.0,
                   help="multiplier on reported thresholds (pipeline refill margin)")
    add_output_options(p)

    p = sub.add_parser("recommend", help="pick a configuration or barrier mechanism")
    what = p.add_subparsers(dest="what", required=True)
    pr = what.add_parser("reduction", help="worker granularity for a reduction")
    pr.add_argument("--bytes", type=float, required=True, dest="input_bytes")
    pr.add_argument("--element-bytes", type=int, default=8)
    pr.add_argument("--fixtures", choices=fixtures.DEVICE_KEYS, default="v100")
    pr.add_argument("--scenery", choices=("1", "2", "auto"), default="auto")
    pr.add_argument("--safety-factor", type=float, default=1.0)
    add_output_options(pr)
    pb = what.add_parser("barrier", help="barrier mechanism for an iteration count")
    pb.add_argument("--iterations", type=int, required=True)
    pb.add_argument("--gpus", type=int, required=True)
    pb.add_argument("--slack", type=float, default=3.0,
                    help="programmability slack factor for the multi-grid note")
    pb.add_argument("--mechanisms", help="comma-separated subset to consider")
    add_output_options(pb)

    p = sub.add_parser("emit-plot", help="emit plot-ready TSV matrices and series")
    p.add_argument("--kind", choices=("series", "heatmap"), required=True)
    p.add_argument("--measurements", help="measurement file (heatmap source)")
    p.add_argument("--level", help="sync level filter for heatmap experiments")
    p.add_argument("--value", choices=("mean", "min"), default="mean")
    add_output_options(p)

    p = sub.add_parser("emulate", help="generate synthetic measurement files")
    p.add_argument("--kind", choices=("fusion", "repeatdiff", "sweep"), required=True)
    p.add_argument("--out", required=True, help="measurement file to write")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=0.0, help="Gaussian noise stddev")
    p.add_argument("--overhead-ns", type=float, default=1081.0)
    p.add_argument("--wait-unit-ns", type=float, default=10000.0)
    p.add_argument("--device-name", default="emulated")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--i", type=int, dest="launches_i", default=5)
    p.add_argument("--j", type=int, dest="wait_units_j", default=1)
    p.add_argument("--instr", default="fadd")
    p.add_argument("--instr-cycles", action="append", default=None,
                   metavar="LABEL=CYCLES", help="instruction latency (repeatable)")
    p.add_argument("--r1", type=int, default=1024)
    p.add_argument("--r2", type=int, default=512)
    p.add_argument("--base-cycles", type=float, default=5000.0)
    p.add_argument("--level", default="grid")
    p.add_argument("--threads", default="32,64,128,256,512,1024",
                   help="comma-separated threads/block sweep")
    p.add_argument("--blocks", default="1,2,4,8,16,32",
                   help="comma-separated blocks/SM sweep")
    p.add_argument("--gpus", type=int, default=1)
    p.add_argument("--sync", action="append", default=None,
                   metavar="LEVEL:BLOCKS:THREADS:GPUS=CYCLES",
                   help="sync latency map entry (repeatable)")

    sub.add_parser("validate", help="recompute bundled tables and diff them")
    return parser


def _deliver(report: Report, args, summary_lines: Sequence[str]) -> None:
    fmt = args.format or "tsv"
    if args.out:
        Path(args.out).write_bytes(emit_report(report, fmt))
        for line in summary_lines:
            print(line)
    elif args.format:
        sys.stdout.write(emit_report(report, fmt).decode("utf-8"))
    else:
        for line in summary_lines:
            print(line)


def cmd_analyze(args) -> int:
    profile = load_device_profile(args.device) if args.device else None
    batches = [(path, load_measurements(path)) for path in args.measurements]
    report = analyze_report(batches, args.reducer, profile)
    table = report.tables[0]
    summary = []
    for source, batch in batches:
        summary.append(f"{source}: device {batch.device_name}, "
                       f"{batch.provenance.value}, {len(batch.experiments)} experiment(s)")
    for row in table.rows:
        cells = dict(zip(table.columns, row))
        spread = (f" +- {format_number(cells['stddev'])}"
                  if cells["stddev"] is not None else "")
        flags = f" [{cells['flags']}]" if cells["flags"] else ""
        converted = ""
        if profile is not None:
            # Conversion is explicit, never implicit: only shown when a
            # device profile supplies the clock.
            if cells["unit"] == "cycles":
                converted = (f" = {format_number(profile.cycles_to_ns(cells['value']))}"
                             f" ns at {format_number(profile.clock_mhz)} MHz")
            else:
                converted = (f" = {format_number(profile.ns_to_cycles(cells['value']))}"
                             f" cycles at {format_number(profile.clock_mhz)} MHz")
        summary.append(f"  {cells['experiment']}: {cells['metric']} = "
                       f"{format_number(cells['value'])} {cells['unit']}{spread}"
                       f"{converted}{flags}")
    _deliver(report, args, summary)
    return 0


def cmd_predict(args) -> int:
    sceneries = None if args.scenery == "all" else (int(args.scenery),)
    if args.table and args.fixtures:
        raise ValidationError("choose either --fixtures or --table, not both")
    if args.table:
        columns = ("scenery", "label", "sync_cycles", "N_l", "N_m")
        rows = []
        for scenery, basic, more, sync in _parse_cost_table(args.table):
            if sceneries is not None and scenery not in sceneries:
                continue
            rows.append((scenery, more.label, sync.total_cycles,
                         switch_point_above(basic, more, sync, args.safety_factor),
                         switch_point_between(basic, sync, args.safety_factor)))
        report = Report("switch_points",
                        (ReportTable("switch_points_custom", columns, tuple(rows)),))
    else:
        keys = list(fixtures.DEVICE_KEYS) if args.fixtures in (None, "all") \
            else [args.fixtures]
        report = switch_point_report(keys, args.safety_factor, sceneries)
    summary = []
    for table in report.tables:
        for row in table.rows:
            scenery, label, sync_cycles, n_l, n_m = row
            n_l_text = "no crossover" if n_l is None else (
                f"{format_number(n_l)} B (round {round(n_l)})")
            summary.append(
                f"{table.name}: scenery {scenery} ({label}): sync "
                f"{format_number(sync_cycles)} cycles, N_l {n_l_text}, "
                f"N_m {format_number(n_m)} B (round {round(n_m)})")
    _deliver(report, args, summary)
    return 0


def cmd_recommend(args) -> int:
    if args.what == "reduction":
        if args.scenery == "auto":
            candidates = fixtures.reduction_ladder(args.fixtures)
        else:
            spec = next(s for s in fixtures.scenery_specs(args.fixtures)
                        if s.scenery == int(args.scenery))
            no_sync = SyncCost(spec.sync.level, 0.0, 1)
            candidates = ((spec.basic, no_sync), (spec.more, spec.sync))
        query = ReductionQuery(args.input_bytes, args.element_bytes,
                               fixtures.device_profile(args.fixtures), candidates)
        rec = recommend_reduction_config(query, args.safety_factor)
        columns = ("chosen", "scenario", "threshold_bytes", "n_m", "n_l")
        table = ReportTable("reduction_recommendation", columns, (
            (rec.chosen, rec.scenario.kind.value, rec.scenario.threshold_bytes,
             rec.n_m, rec.n_l),))
        summary = [f"choose {rec.chosen}", rec.rationale]
        _deliver(Report("recommendation", (table,)), args, summary)
        return 0

    mechanisms = args.mechanisms.split(",") if args.mechanisms else None
    rec = recommend_barrier(args.iterations, args.gpus, fixtures.BARRIER_COSTS,
                            slack_factor=args.slack, mechanisms=mechanisms)
    if rec.chosen is None:
        print(f"error[E_DATA]: {rec.rationale}", file=sys.stderr)
        return 1
    columns = ("mechanism", "total_ns", "per_iteration_ns", "margin_ns", "within_slack")
    rows = []
    for name in sorted(rec.total_ns):
        rows.append((name, rec.total_ns[name], rec.per_iteration_ns[name],
                     rec.margins_ns.get(name), name in rec.within_slack))
    table = ReportTable("barrier_recommendation", columns, tuple(rows))
    summary = [f"choose {rec.chosen}", rec.rationale]
    _deliver(Report("recommendation", (table,)), args, summary)
    return 0


def cmd_emit_plot(args) -> int:
    if args.kind == "series":
        table = fixtures.multi_gpu_series()
        report = Report("series", (table,))
        summary = [f"series {table.name}: {len(table.rows)} row(s)"]
        _deliver(report, args, summary)
        return 0
    if not args.measurements:
        raise ValidationError("heatmap needs --measurements")
    batch = load_measurements(args.measurements)
    cells: dict[tuple[int, int], float] = {}
    for record in batch.experiments:
        spec = record.spec
        if spec.kind != "timing":
            continue
        if args.level and spec.params.get("level") != args.level:
            continue
        threads = spec.int_param("threads_per_block")
        blocks = spec.int_param("blocks_per_sm")
        values = [s.value for s in record.samples]
        if not values:
            raise ValidationError(f"experiment {spec.experiment_id!r} has no samples")
        value = sum(values) / len(values) if args.value == "mean" else min(values)
        if (threads, blocks) in cells:
            raise ValidationError(
                f"duplicate heatmap cell for threads={threads} blocks={blocks}")
        cells[(threads, blocks)] = value
    if not cells:
        raise ValidationError("no timing experiments matched the heatmap request")
    row_keys = sorted({t for t, _ in cells})
    col_keys = sorted({b for _, b in cells})
    table = heatmap_table(f"latency_heatmap_{args.level or 'all'}",
                          "threads_per_block", row_keys, col_keys, cells)
    summary = [f"heatmap {table.name}: {len(row_keys)} x {len(col_keys)} cells"]
    _deliver(Report("heatmap", (table,)), args, summary)
    return 0


def cmd_emulate(args) -> int:
    instr = {"fadd": 4.0}
    for token in args.instr_cycles or ():
        label, eq, cycles = token.partition("=")
        if not eq:
            raise ValidationError(f"bad --instr-cycles token {token!r}")
        instr[label] = float(cycles)
    sync: dict[tuple[str, int, int, int], float] = {}
    for token in args.sync or ():
        key_text, eq, cycles = token.partition("=")
        parts = key_text.split(":")
        if not eq or len(parts) != 4:
            raise ValidationError(f"bad --sync token {token!r}")
        sync[(parts[0], int(parts[1]), int(parts[2]), int(parts[3]))] = float(cycles)
    dev = EmulatedDevice(
        launch_overhead_ns=args.overhead_ns,
        wait_unit_ns=args.wait_unit_ns,
        instr_latency_cycles=instr,
        sync_latency_cycles=sync,
        noise_sigma=args.sigma,
        seed=args.seed,
    )
    if args.kind == "fusion":
        batch = generate_fusion_batch(dev, args.launches_i, args.wait_units_j,
                                      args.runs, args.device_name)
    elif args.kind == "repeatdiff":
        batch = generate_repeatdiff_batch(dev, args.instr, args.r1, args.r2,
                                          args.runs, args.base_cycles, args.device_name)
    else:
        threads = tuple(int(t) for t in args.threads.split(","))
        blocks = tuple(int(b) for b in args.blocks.split(","))
        batch = generate_sync_sweep_batch(dev, args.level, threads, blocks,
                                          args.gpus, args.runs, args.device_name)
    save_measurements(batch, args.out)
    total = sum(len(r.samples) for r in batch.experiments)
    print(f"wrote {len(batch.experiments)} experiment(s), {total} sample(s) to {args.out}")
    return 0


def cmd_validate(args) -> int:
    lines, ok = validate_lines()
    for line in lines:
        print(line)
    return 0 if ok else 1


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "analyze": cmd_analyze,
        "predict": cmd_predict,
        "recommend": cmd_recommend,
        "emit-plot": cmd_emit_plot,
        "emulate": cmd_emulate,
        "validate": cmd_validate,
    }
    try:
        return handlers[args.verb](args)
    except SyncperfError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error[E_IO]: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
