"""Measurement wire format, device-profile files, and report emission.

The measurement format is line-oriented text so a CUDA harness can emit it
with no dependencies: a header block of ``key: value`` lines (including one
``experiment:`` descriptor per experiment), a ``---`` separator, then a CSV
body ``experiment_id,clock_domain,run_index,value``. Fusion and repeat-diff
experiments qualify their sample ids with an arm suffix (``id/ij``, ``id/ji``,
``id/k1``, ``id/k2``). A JSON object encoding the same schema is accepted as
an alternative on load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from .analysis import (
    ClockDomain,
    FusionExperiment,
    RepeatDiffExperiment,
    TimingSample,
)
from .device import DeviceProfile, Interconnect
from .errors import ParseError, ValidationError

SCHEMA_VERSION = 1

CSV_HEADER = "experiment_id,clock_domain,run_index,value"

EXPERIMENT_KINDS = ("fusion", "repeatdiff", "timing")

_ARM_SUFFIXES = {
    "fusion": ("ij", "ji"),
    "repeatdiff": ("k1", "k2"),
    "timing": (),
}


class Provenance(Enum):
    HARDWARE = "hardware"
    EMULATOR = "emulator"
    FIXTURE = "fixture"


@dataclass(frozen=True)
class ExperimentSpec:
    """Descriptor for one experiment: stable id, kind, and string params."""

    experiment_id: str
    kind: str
    params: Mapping[str, str]

    def __post_init__(self) -> None:
        if not self.experiment_id or any(c.isspace() or c == "," for c in self.experiment_id):
            raise ValidationError(f"bad experiment id {self.experiment_id!r}")
        if "/" in self.experiment_id:
            raise ValidationError("experiment ids must not contain '/' (arm separator)")
        if self.kind not in EXPERIMENT_KINDS:
            raise ValidationError(f"unknown experiment type {self.kind!r}")
        object.__setattr__(self, "params", dict(self.params))

    def int_param(self, name: str) -> int:
        try:
            return int(self.params[name])
        except KeyError:
            raise ValidationError(f"experiment {self.experiment_id!r} missing param {name!r}")
        except ValueError:
            raise ValidationError(
                f"experiment {self.experiment_id!r} param {name!r} is not an integer")


@dataclass(frozen=True)
class ExperimentRecord:
    """One experiment descriptor together with its samples."""

    spec: ExperimentSpec
    samples: tuple[TimingSample, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        suffixes = _ARM_SUFFIXES[self.spec.kind]
        for s in self.samples:
            base, _, arm = s.experiment_id.partition("/")
            if base != self.spec.experiment_id:
                raise ValidationError(
                    f"sample id {s.experiment_id!r} does not belong to "
                    f"experiment {self.spec.experiment_id!r}")
            if suffixes and arm not in suffixes:
                raise ValidationError(
                    f"sample id {s.experiment_id!r}: expected one of the arms {suffixes}")
            if not suffixes and arm:
                raise ValidationError(
                    f"sample id {s.experiment_id!r}: timing experiments take no arm suffix")
        domains = {s.clock_domain for s in self.samples}
        if len(domains) > 1:
            raise ValidationError(
                f"experiment {self.spec.experiment_id!r} mixes clock domains")

    def arm(self, suffix: str) -> tuple[TimingSample, ...]:
        want = f"{self.spec.experiment_id}/{suffix}"
        return tuple(s for s in self.samples if s.experiment_id == want)

    def as_fusion(self) -> FusionExperiment:
        if self.spec.kind != "fusion":
            raise ValidationError(f"experiment {self.spec.experiment_id!r} is not a fusion run")
        return FusionExperiment(
            launches_i=self.spec.int_param("launches_i"),
            wait_units_j=self.spec.int_param("wait_units_j"),
            samples_ij=self.arm("ij"),
            samples_ji=self.arm("ji"),
        )

    def as_repeatdiff(self) -> RepeatDiffExperiment:
        if self.spec.kind != "repeatdiff":
            raise ValidationError(
                f"experiment {self.spec.experiment_id!r} is not a repeat-diff run")
        return RepeatDiffExperiment(
            repeats_r1=self.spec.int_param("repeats_r1"),
            repeats_r2=self.spec.int_param("repeats_r2"),
            samples_k1=self.arm("k1"),
            samples_k2=self.arm("k2"),
            instruction=self.spec.params.get("instr", ""),
        )


@dataclass(frozen=True)
class MeasurementBatch:
    """A fully validated set of experiments from one device."""

    schema_version: int
    device_name: str
    provenance: Provenance
    experiments: tuple[ExperimentRecord, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "experiments", tuple(self.experiments))
        if self.schema_version != SCHEMA_VERSION:
            raise ValidationError(f"unsupported schema_version {self.schema_version}")
        seen: set[str] = set()
        for record in self.experiments:
            if record.spec.experiment_id in seen:
                raise ValidationError(
                    f"duplicate experiment id {record.spec.experiment_id!r}")
            seen.add(record.spec.experiment_id)

    def experiment(self, experiment_id: str) -> ExperimentRecord:
        for record in self.experiments:
            if record.spec.experiment_id == experiment_id:
                return record
        raise ValidationError(f"no experiment {experiment_id!r} in batch")


def format_value(value: float) -> str:
    """Shortest exact text for a sample value; integers stay integers."""
    if value == int(value) and abs(value) < 2 ** 53:
        return str(int(value))
    return repr(value)


def dumps_measurements(batch: MeasurementBatch) -> str:
    lines = [
        f"schema_version: {batch.schema_version}",
        f"device: {batch.device_name}",
        f"provenance: {batch.provenance.value}",
    ]
    for record in batch.experiments:
        params = " ".join(f"{k}={v}" for k, v in record.spec.params.items())
        descriptor = f"experiment: {record.spec.experiment_id} type={record.spec.kind}"
        if params:
            descriptor += f" {params}"
        lines.append(descriptor)
    lines.append("---")
    lines.append(CSV_HEADER)
    for record in batch.experiments:
        for s in record.samples:
            lines.append(
                f"{s.experiment_id},{s.clock_domain.value},{s.run_index},"
                f"{format_value(s.value)}")
    return "\n".join(lines) + "\n"


def save_measurements(batch: MeasurementBatch, path: str | Path) -> None:
    Path(path).write_bytes(dumps_measurements(batch).encode("utf-8"))


def _parse_params(tokens: list[str], path: str, lineno: int) -> dict[str, str]:
    params: dict[str, str] = {}
    for token in tokens:
        key, eq, value = token.partition("=")
        if not eq or not key or not value:
            raise ParseError(f"bad param token {token!r}", path=path, line=lineno)
        if key in params:
            raise ParseError(f"duplicate param {key!r}", path=path, line=lineno)
        params[key] = value
    return params


def loads_measurements(text: str, path: str = "<string>") -> MeasurementBatch:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return _measurements_from_json(stripped, path)

    header: dict[str, str] = {}
    specs: list[ExperimentSpec] = []
    spec_lines: dict[str, int] = {}
    lines = text.splitlines()
    body_start = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "---":
            body_start = lineno
            break
        key, sep, value = line.partition(":")
        if not sep:
            raise ParseError(f"expected 'key: value', got {line!r}", path=path, line=lineno)
        key = key.strip()
        value = value.strip()
        if key == "experiment":
            tokens = value.split()
            if not tokens:
                raise ParseError("empty experiment descriptor", path=path, line=lineno)
            params = _parse_params(tokens[1:], path, lineno)
            kind = params.pop("type", None)
            if kind is None:
                raise ParseError("experiment descriptor missing type=", path=path, line=lineno)
            if kind not in EXPERIMENT_KINDS:
                raise ParseError(f"unknown experiment type {kind!r}", path=path, line=lineno)
            try:
                spec = ExperimentSpec(tokens[0], kind, params)
            except ValidationError as exc:
                raise ParseError(str(exc), path=path, line=lineno)
            if spec.experiment_id in spec_lines:
                raise ParseError(f"duplicate experiment id {spec.experiment_id!r}",
                                 path=path, line=lineno)
            spec_lines[spec.experiment_id] = lineno
            specs.append(spec)
        else:
            if key in header:
                raise ParseError(f"duplicate header key {key!r}", path=path, line=lineno)
            header[key] = value

    if body_start is None:
        raise ParseError("missing '---' separator before sample table", path=path)
    for required in ("schema_version", "device", "provenance"):
        if required not in header:
            raise ParseError(f"missing header key {required!r}", path=path)
    try:
        schema_version = int(header["schema_version"])
    except ValueError:
        raise ParseError("schema_version is not an integer", path=path)
    if schema_version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {schema_version}", path=path)
    try:
        provenance = Provenance(header["provenance"])
    except ValueError:
        raise ParseError(f"unknown provenance {header['provenance']!r}", path=path)

    by_id: dict[str, list[TimingSample]] = {spec.experiment_id: [] for spec in specs}
    saw_csv_header = False
    for lineno in range(body_start + 1, len(lines) + 1):
        line = lines[lineno - 1].strip()
        if not line or line.startswith("#"):
            continue
        if not saw_csv_header:
            if line != CSV_HEADER:
                raise ParseError(f"expected CSV header {CSV_HEADER!r}", path=path, line=lineno)
            saw_csv_header = True
            continue
        cells = line.split(",")
        if len(cells) != 4:
            raise ParseError(f"expected 4 CSV columns, got {len(cells)}", path=path, line=lineno)
        sample_id, domain_text, run_text, value_text = (c.strip() for c in cells)
        base = sample_id.partition("/")[0]
        if base not in by_id:
            raise ParseError(
                f"sample id {sample_id!r} resolves to no experiment descriptor",
                path=path, line=lineno)
        try:
            domain = ClockDomain(domain_text)
        except ValueError:
            raise ParseError(f"unknown clock domain {domain_text!r}", path=path, line=lineno)
        try:
            run_index = int(run_text)
            value = float(value_text)
        except ValueError:
            raise ParseError(f"bad numeric cell in row {line!r}", path=path, line=lineno)
        try:
            sample = TimingSample(sample_id, domain, value, run_index)
        except ValidationError as exc:
            raise ParseError(str(exc), path=path, line=lineno)
        by_id[base].append(sample)

    if not saw_csv_header:
        raise ParseError("missing CSV header after '---'", path=path)

    records = []
    for spec in specs:
        try:
            records.append(ExperimentRecord(spec, tuple(by_id[spec.experiment_id])))
        except ValidationError as exc:
            raise ParseError(str(exc), path=path, line=spec_lines[spec.experiment_id])
    return MeasurementBatch(schema_version, header["device"], provenance, tuple(records))


def _measurements_from_json(text: str, path: str) -> MeasurementBatch:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad JSON: {exc.msg}", path=path, line=exc.lineno)
    try:
        schema_version = int(payload["schema_version"])
        if schema_version != SCHEMA_VERSION:
            raise ParseError(f"unsupported schema_version {schema_version}", path=path)
        provenance = Provenance(payload["provenance"])
        records = []
        for entry in payload["experiments"]:
            spec = ExperimentSpec(entry["id"], entry["type"],
                                  {k: str(v) for k, v in entry.get("params", {}).items()})
            samples = tuple(
                TimingSample(s["experiment_id"], ClockDomain(s["clock_domain"]),
                             float(s["value"]), int(s.get("run_index", 0)))
                for s in entry.get("samples", ()))
            records.append(ExperimentRecord(spec, samples))
        return MeasurementBatch(schema_version, str(payload["device"]),
                                provenance, tuple(records))
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError, ValidationError) as exc:
        raise ParseError(f"bad measurement object: {exc}", path=path)


def load_measurements(path: str | Path) -> MeasurementBatch:
    p = Path(path)
    if not p.exists():
        raise ParseError("file does not exist", path=str(path))
    return loads_measurements(p.read_text(encoding="utf-8"), path=str(path))


_PROFILE_KEYS = ("name", "sm_count", "warp_size", "max_warps_per_sm",
                 "max_threads_per_block", "clock_mhz", "gpu_count", "interconnect")


def dumps_device_profile(profile: DeviceProfile) -> str:
    clock = profile.clock_mhz
    clock_text = str(int(clock)) if clock == int(clock) else repr(clock)
    lines = [
        f"name={profile.name}",
        f"sm_count={profile.sm_count}",
        f"warp_size={profile.warp_size}",
        f"max_warps_per_sm={profile.max_warps_per_sm}",
        f"max_threads_per_block={profile.max_threads_per_block}",
        f"clock_mhz={clock_text}",
        f"gpu_count={profile.gpu_count}",
        f"interconnect={profile.interconnect.value}",
    ]
    return "\n".join(lines) + "\n"


def save_device_profile(profile: DeviceProfile, path: str | Path) -> None:
    Path(path).write_bytes(dumps_device_profile(profile).encode("utf-8"))


def loads_device_profile(text: str, path: str = "<string>") -> DeviceProfile:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ParseError(f"expected 'key=value', got {line!r}", path=path, line=lineno)
        key = key.strip()
        if key not in _PROFILE_KEYS:
            raise ParseError(f"unknown device profile key {key!r}", path=path, line=lineno)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", path=path, line=lineno)
        values[key] = value.strip()
    missing = [k for k in _PROFILE_KEYS if k not in values]
    if missing:
        raise ParseError(f"missing device profile keys: {', '.join(missing)}", path=path)
    try:
        return DeviceProfile(
            name=values["name"],
            sm_count=int(values["sm_count"]),
            warp_size=int(values["warp_size"]),
            max_warps_per_sm=int(values["max_warps_per_sm"]),
            max_threads_per_block=int(values["max_threads_per_block"]),
            clock_mhz=float(values["clock_mhz"]),
            gpu_count=int(values["gpu_count"]),
            interconnect=Interconnect(values["interconnect"]),
        )
    except ValueError as exc:
        raise ParseError(f"bad device profile value: {exc}", path=path)


def load_device_profile(path: str | Path) -> DeviceProfile:
    p = Path(path)
    if not p.exists():
        raise ParseError("file does not exist", path=str(path))
    return loads_device_profile(p.read_text(encoding="utf-8"), path=str(path))


def format_number(value: object) -> str:
    """Locale-independent cell text; floats at 6 significant digits."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def canonical_number(value: float) -> float:
    """Float rounded to 6 significant digits (stable structured output)."""
    return float(f"{value:.6g}")


@dataclass(frozen=True)
class ReportTable:
    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple[object, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValidationError(
                    f"table {self.name!r}: row width {len(row)} != "
                    f"{len(self.columns)} columns")


@dataclass(frozen=True)
class Report:
    title: str
    tables: tuple[ReportTable, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tables", tuple(self.tables))


def emit_report(report: Report, fmt: str = "tsv") -> bytes:
    """Serialize a report deterministically (UTF-8, LF line endings)."""
    if fmt == "tsv":
        chunks: list[str] = []
        multi = len(report.tables) != 1
        for index, table in enumerate(report.tables):
            if multi:
                if index:
                    chunks.append("")
                chunks.append(f"# {table.name}")
            chunks.append("\t".join(table.columns))
            for row in table.rows:
                chunks.append("\t".join(format_number(cell) for cell in row))
        return ("\n".join(chunks) + "\n").encode("utf-8")
    if fmt == "structured":
        payload = {
            "title": report.title,
            "tables": [
                {
                    "name": table.name,
                    "columns": list(table.columns),
                    "rows": [
                        [canonical_number(c) if isinstance(c, float) else c for c in row]
                        for row in table.rows
                    ],
                }
                for table in report.tables
            ],
        }
        return (json.dumps(payload, sort_keys=True, indent=2) + "\n").encode("utf-8")
    raise ValidationError(f"unknown report format {fmt!r}")


def heatmap_table(name: str, row_label: str, row_keys: Iterable[int],
                  col_keys: Iterable[int],
                  values: Mapping[tuple[int, int], float]) -> ReportTable:
    """Row-major matrix table; missing cells stay empty."""
    cols = list(col_keys)
    columns = (row_label, *[str(c) for c in cols])
    rows = []
    for r in row_keys:
        rows.append(tuple([r] + [values.get((r, c)) for c in cols]))
    return ReportTable(name, columns, tuple(rows))
