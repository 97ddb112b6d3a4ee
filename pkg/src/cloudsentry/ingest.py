"""Telemetry ingestion: CSV/JSONL parsers and the synthetic stream generator.

The generator stands in for a real multi-cloud telemetry corpus: each
provider emits a diurnal sinusoid plus Gaussian noise per channel, and a
scenario injects labeled faults (metric spikes, drifts, channel dropouts,
and log bursts) over declared step intervals. Generation is driven by the
portable xoshiro256** generator from :mod:`cloudsentry.rng`, with separate
substreams for baseline noise, routine logs, and fault content, so removing
the fault list reproduces the exact same baseline stream.

File formats (documented contract):

  CSV    UTF-8, comma-separated, header required. The schema config names a
         timestamp column (epoch milliseconds, integer), one or more metric
         columns, and optionally a log text column, a 0/1 label column, and
         provider/service columns.
  JSONL  One object per line with fields ``ts`` (int, epoch ms), ``metrics``
         (array of numbers), optional ``logs`` (array of strings), optional
         ``label`` (0/1), optional ``provider``/``service`` (strings).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable

from .errors import (
    ChannelMismatchError,
    InvalidScenarioError,
    ParseError,
    SchemaError,
)
from .rng import Xoshiro256StarStar, derive_stream_seed
from .telemetry import TelemetryRecord, validate_record

FAULT_SPIKE = "spike"
FAULT_DRIFT = "drift"
FAULT_DROPOUT = "dropout"
FAULT_LOG_BURST = "log-burst"
FAULT_KINDS = (FAULT_SPIKE, FAULT_DRIFT, FAULT_DROPOUT, FAULT_LOG_BURST)

# Routine log lines emitted during normal operation. Fillers: {hex} is an
# 8-char hex id, {num} a small integer, {ip} a dotted-quad address.
_NORMAL_LOG_TEMPLATES = (
    "INFO health probe ok node {hex} rtt {num} ms",
    "INFO request {hex} served in {num} ms",
    "INFO autoscaler holding steady at {num} replicas",
    "INFO cache hit ratio {num} percent for shard {hex}",
)

# Anomalous log lines appended by log-burst faults.
_ERROR_LOG_TEMPLATES = (
    "ERROR connection to {ip} timed out after {num} ms",
    "ERROR disk quota exceeded on volume {hex}",
    "ERROR upstream {hex} returned status {num} repeatedly",
    "WARN retry storm detected toward endpoint {ip}",
    "ERROR oom killer terminated worker {num} on node {hex}",
)


# --- synthetic scenario -----------------------------------------------------


@dataclass(frozen=True)
class ProviderProfile:
    """Baseline signal shape for one provider's channels."""

    provider_id: str
    base_level: tuple[float, ...]
    diurnal_amplitude: tuple[float, ...]
    noise_std: tuple[float, ...]
    service_id: str = "core"
    period_steps: int = 288
    phase: float = 0.0
    log_rate: float = 0.3


@dataclass(frozen=True)
class FaultSpec:
    """One injected fault over a step interval on one provider."""

    start_step: int
    length: int
    kind: str
    magnitude: float
    provider_id: str
    channel: int | None = None


@dataclass(frozen=True)
class SyntheticScenario:
    """Full description of a reproducible synthetic stream."""

    seed: int
    duration_steps: int
    providers: tuple[ProviderProfile, ...]
    fault_specs: tuple[FaultSpec, ...] = ()
    start_ms: int = 0
    step_ms: int = 1000


@dataclass(frozen=True)
class LabeledStream:
    """Time-ordered records plus the per-record ground-truth anomaly flags."""

    records: tuple[TelemetryRecord, ...]
    ground_truth: tuple[bool, ...]

    def __post_init__(self):
        if len(self.records) != len(self.ground_truth):
            raise ValueError("records and ground_truth must have equal length")


def validate_scenario(scenario: SyntheticScenario) -> SyntheticScenario:
    """Check every scenario constraint; raises InvalidScenarioError."""
    if scenario.duration_steps < 1:
        raise InvalidScenarioError("duration_steps must be >= 1")
    if not scenario.providers:
        raise InvalidScenarioError("at least one provider profile is required")
    channels = len(scenario.providers[0].base_level)
    if channels < 1:
        raise InvalidScenarioError("providers need at least one channel")
    provider_ids = set()
    for prof in scenario.providers:
        if prof.provider_id in provider_ids:
            raise InvalidScenarioError(f"duplicate provider id {prof.provider_id!r}")
        provider_ids.add(prof.provider_id)
        for name, values in (
            ("base_level", prof.base_level),
            ("diurnal_amplitude", prof.diurnal_amplitude),
            ("noise_std", prof.noise_std),
        ):
            if len(values) != channels:
                raise InvalidScenarioError(
                    f"provider {prof.provider_id!r}: {name} must have {channels} entries"
                )
            if any(not math.isfinite(v) for v in values):
                raise InvalidScenarioError(
                    f"provider {prof.provider_id!r}: {name} contains non-finite values"
                )
        if prof.period_steps < 1:
            raise InvalidScenarioError("period_steps must be >= 1")
    for spec in scenario.fault_specs:
        if spec.kind not in FAULT_KINDS:
            raise InvalidScenarioError(f"unknown fault kind {spec.kind!r}")
        if spec.provider_id not in provider_ids:
            raise InvalidScenarioError(f"fault targets unknown provider {spec.provider_id!r}")
        if spec.length < 1:
            raise InvalidScenarioError("fault length must be >= 1")
        if not (0 <= spec.start_step and spec.start_step + spec.length <= scenario.duration_steps):
            raise InvalidScenarioError(
                f"fault interval [{spec.start_step}, {spec.start_step + spec.length}) "
                f"outside [0, {scenario.duration_steps})"
            )
        if not math.isfinite(spec.magnitude):
            raise InvalidScenarioError("fault magnitude must be finite")
        if spec.kind in (FAULT_SPIKE, FAULT_DRIFT, FAULT_DROPOUT):
            if spec.channel is None or not (0 <= spec.channel < channels):
                raise InvalidScenarioError(
                    f"{spec.kind} fault needs a channel index in [0, {channels})"
                )
    return scenario


def scenario_channel_count(scenario: SyntheticScenario) -> int:
    return len(scenario.providers[0].base_level)


def _fill_log_template(template: str, rng: Xoshiro256StarStar) -> str:
    """Substitute filler fields; draw order is fixed left-to-right."""
    out = []
    i = 0
    while i < len(template):
        if template.startswith("{hex}", i):
            out.append(f"{rng.next_u64() & 0xFFFFFFFF:08x}")
            i += 5
        elif template.startswith("{num}", i):
            out.append(str(rng.bounded_int(9000) + 100))
            i += 5
        elif template.startswith("{ip}", i):
            out.append(
                "10.%d.%d.%d"
                % (rng.bounded_int(256), rng.bounded_int(256), rng.bounded_int(256))
            )
            i += 4
        else:
            out.append(template[i])
            i += 1
    return "".join(out)


def baseline_value(profile: ProviderProfile, channel: int, step: int) -> float:
    """Noise-free baseline for one channel at one step (diurnal sinusoid)."""
    channels = len(profile.base_level)
    phase = profile.phase + channel / channels
    return profile.base_level[channel] + profile.diurnal_amplitude[channel] * math.sin(
        2.0 * math.pi * (step / profile.period_steps + phase)
    )


def generate(scenario: SyntheticScenario) -> LabeledStream:
    """Simulate the scenario into a labeled record stream.

    Deterministic for a fixed scenario: baseline noise, routine logs, and
    fault content each consume an independent substream, so the presence of
    faults never shifts the baseline draws.
    """
    validate_scenario(scenario)
    channels = scenario_channel_count(scenario)
    metric_rng = Xoshiro256StarStar(derive_stream_seed(scenario.seed, 0))
    log_rng = Xoshiro256StarStar(derive_stream_seed(scenario.seed, 1))
    fault_rng = Xoshiro256StarStar(derive_stream_seed(scenario.seed, 2))

    faults_by_provider: dict[str, list[FaultSpec]] = {
        prof.provider_id: [] for prof in scenario.providers
    }
    for spec in scenario.fault_specs:
        faults_by_provider[spec.provider_id].append(spec)

    records: list[TelemetryRecord] = []
    truth: list[bool] = []
    for step in range(scenario.duration_steps):
        ts = scenario.start_ms + step * scenario.step_ms
        for prof in scenario.providers:
            values = [
                baseline_value(prof, c, step) + prof.noise_std[c] * metric_rng.normal()
                for c in range(channels)
            ]
            active = [
                f
                for f in faults_by_provider[prof.provider_id]
                if f.start_step <= step < f.start_step + f.length
            ]
            logs: list[str] = []
            if log_rng.random() < prof.log_rate:
                template = _NORMAL_LOG_TEMPLATES[log_rng.bounded_int(len(_NORMAL_LOG_TEMPLATES))]
                logs.append(_fill_log_template(template, log_rng))
            for f in active:
                if f.kind == FAULT_SPIKE:
                    values[f.channel] += f.magnitude * prof.noise_std[f.channel]
                elif f.kind == FAULT_DRIFT:
                    progress = (step - f.start_step + 1) / f.length
                    values[f.channel] += f.magnitude * prof.noise_std[f.channel] * progress
                elif f.kind == FAULT_DROPOUT:
                    values[f.channel] = 0.0
                elif f.kind == FAULT_LOG_BURST:
                    lines_per_step = max(1, int(round(f.magnitude)))
                    for _ in range(lines_per_step):
                        template = _ERROR_LOG_TEMPLATES[
                            fault_rng.bounded_int(len(_ERROR_LOG_TEMPLATES))
                        ]
                        logs.append(_fill_log_template(template, fault_rng))
            anomalous = bool(active)
            records.append(
                TelemetryRecord(
                    timestamp=ts,
                    provider_id=prof.provider_id,
                    service_id=prof.service_id,
                    metrics=tuple(values),
                    log_lines=tuple(logs),
                    label=anomalous,
                )
            )
            truth.append(anomalous)
    return LabeledStream(records=tuple(records), ground_truth=tuple(truth))


# --- scenario (de)serialization ---------------------------------------------


def scenario_to_dict(scenario: SyntheticScenario) -> dict:
    return {
        "seed": scenario.seed,
        "duration_steps": scenario.duration_steps,
        "start_ms": scenario.start_ms,
        "step_ms": scenario.step_ms,
        "providers": [
            {
                "provider_id": p.provider_id,
                "service_id": p.service_id,
                "base_level": list(p.base_level),
                "diurnal_amplitude": list(p.diurnal_amplitude),
                "noise_std": list(p.noise_std),
                "period_steps": p.period_steps,
                "phase": p.phase,
                "log_rate": p.log_rate,
            }
            for p in scenario.providers
        ],
        "faults": [
            {
                "start_step": f.start_step,
                "length": f.length,
                "kind": f.kind,
                "magnitude": f.magnitude,
                "provider_id": f.provider_id,
                "channel": f.channel,
            }
            for f in scenario.fault_specs
        ],
    }


def scenario_from_dict(data: dict) -> SyntheticScenario:
    try:
        providers = tuple(
            ProviderProfile(
                provider_id=p["provider_id"],
                service_id=p.get("service_id", "core"),
                base_level=tuple(float(v) for v in p["base_level"]),
                diurnal_amplitude=tuple(float(v) for v in p["diurnal_amplitude"]),
                noise_std=tuple(float(v) for v in p["noise_std"]),
                period_steps=int(p.get("period_steps", 288)),
                phase=float(p.get("phase", 0.0)),
                log_rate=float(p.get("log_rate", 0.3)),
            )
            for p in data["providers"]
        )
        faults = tuple(
            FaultSpec(
                start_step=int(f["start_step"]),
                length=int(f["length"]),
                kind=f["kind"],
                magnitude=float(f["magnitude"]),
                provider_id=f["provider_id"],
                channel=None if f.get("channel") is None else int(f["channel"]),
            )
            for f in data.get("faults", [])
        )
        scenario = SyntheticScenario(
            seed=int(data["seed"]),
            duration_steps=int(data["duration_steps"]),
            providers=providers,
            fault_specs=faults,
            start_ms=int(data.get("start_ms", 0)),
            step_ms=int(data.get("step_ms", 1000)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScenarioError(f"malformed scenario document: {exc}") from exc
    return validate_scenario(scenario)


def load_scenario(path: str | Path) -> SyntheticScenario:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))


# --- JSONL ------------------------------------------------------------------


def record_to_json(record: TelemetryRecord) -> str:
    obj: dict = {
        "ts": record.timestamp,
        "provider": record.provider_id,
        "service": record.service_id,
        "metrics": list(record.metrics),
    }
    if record.log_lines:
        obj["logs"] = list(record.log_lines)
    if record.label is not None:
        obj["label"] = int(record.label)
    return json.dumps(obj, sort_keys=True)


def write_jsonl(records: Iterable[TelemetryRecord], path: str | Path) -> int:
    """Write one JSON object per record; returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record_to_json(record) + "\n")
            count += 1
    return count


def _open_source(source: str | Path | IO) -> IO:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8"))
    return source


def parse_jsonl(source: str | Path | IO, channels: int) -> list[TelemetryRecord]:
    """Parse a JSONL stream into validated records.

    Raises ParseError (with line number) for structural problems, and lets
    ChannelMismatchError / NonFiniteValueError surface for semantic ones.
    """
    fh = _open_source(source)
    close = isinstance(source, (str, Path, bytes, bytearray))
    records: list[TelemetryRecord] = []
    try:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed JSON ({exc.msg})", line_no) from exc
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", line_no)
            try:
                ts = int(obj["ts"])
                metrics = tuple(float(v) for v in obj["metrics"])
            except KeyError as exc:
                raise ParseError(f"missing field {exc.args[0]!r}", line_no) from exc
            except (TypeError, ValueError) as exc:
                raise ParseError(f"bad field value: {exc}", line_no) from exc
            if ts < 0:
                raise ParseError("timestamp must be nonnegative", line_no)
            logs = obj.get("logs", [])
            if not isinstance(logs, list) or any(not isinstance(s, str) for s in logs):
                raise ParseError("logs must be an array of strings", line_no)
            label_raw = obj.get("label")
            label = None if label_raw is None else bool(int(label_raw))
            record = TelemetryRecord(
                timestamp=ts,
                provider_id=str(obj.get("provider", "default")),
                service_id=str(obj.get("service", "default")),
                metrics=metrics,
                log_lines=tuple(logs),
                label=label,
            )
            records.append(validate_record(record, channels))
    finally:
        if close:
            fh.close()
    return records


# --- CSV --------------------------------------------------------------------


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for CSV ingestion. Timestamps are epoch milliseconds."""

    timestamp_column: str
    metric_columns: tuple[str, ...]
    log_column: str | None = None
    label_column: str | None = None
    provider_column: str | None = None
    service_column: str | None = None
    default_provider: str = "default"
    default_service: str = "default"


def parse_csv(source: str | Path | IO, schema: CsvSchema) -> list[TelemetryRecord]:
    """Parse a CSV stream into validated records, preserving file order."""
    if not schema.metric_columns:
        raise SchemaError("schema must name at least one metric column")
    fh = _open_source(source)
    close = isinstance(source, (str, Path, bytes, bytearray))
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file: header row required") from None
        index: dict[str, int] = {name: i for i, name in enumerate(header)}
        required = (schema.timestamp_column, *schema.metric_columns)
        for name in required:
            if name not in index:
                raise SchemaError(f"missing required column {name!r}")
        optional = {
            name: index.get(name)
            for name in (
                schema.log_column,
                schema.label_column,
                schema.provider_column,
                schema.service_column,
            )
            if name is not None
        }
        for name, pos in optional.items():
            if pos is None:
                raise SchemaError(f"missing configured column {name!r}")

        records: list[TelemetryRecord] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(row)}", line_no
                )
            try:
                ts = int(row[index[schema.timestamp_column]])
            except ValueError as exc:
                raise ParseError(f"bad timestamp: {exc}", line_no) from exc
            if ts < 0:
                raise ParseError("timestamp must be nonnegative", line_no)
            metrics = []
            for name in schema.metric_columns:
                raw = row[index[name]]
                try:
                    metrics.append(float(raw))
                except ValueError as exc:
                    raise ParseError(f"bad metric {name!r}: {raw!r}", line_no) from exc
            logs: tuple[str, ...] = ()
            if schema.log_column is not None:
                text = row[index[schema.log_column]]
                if text:
                    logs = (text,)
            label = None
            if schema.label_column is not None:
                raw = row[index[schema.label_column]].strip()
                if raw:
                    try:
                        label = bool(int(raw))
                    except ValueError as exc:
                        raise ParseError(f"bad label: {raw!r}", line_no) from exc
            provider = (
                row[index[schema.provider_column]]
                if schema.provider_column is not None
                else schema.default_provider
            )
            service = (
                row[index[schema.service_column]]
                if schema.service_column is not None
                else schema.default_service
            )
            record = TelemetryRecord(
                timestamp=ts,
                provider_id=provider,
                service_id=service,
                metrics=tuple(metrics),
                log_lines=logs,
                label=label,
            )
            records.append(validate_record(record, len(schema.metric_columns)))
        return records
    finally:
        if close:
            fh.close()


def write_csv(records: Iterable[TelemetryRecord], path: str | Path, schema: CsvSchema) -> int:
    """Write records as CSV per the schema; the inverse of parse_csv.

    The log column (if configured) holds the first log line only; multi-line
    records need JSONL. Metric values use repr so floats round-trip exactly.
    """
    header = [schema.timestamp_column, *schema.metric_columns]
    for name in (schema.log_column, schema.label_column,
                 schema.provider_column, schema.service_column):
        if name is not None:
            header.append(name)
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for record in records:
            row = [str(record.timestamp)]
            row.extend(repr(value) for value in record.metrics)
            if schema.log_column is not None:
                row.append(record.log_lines[0] if record.log_lines else "")
            if schema.label_column is not None:
                row.append("" if record.label is None else str(int(record.label)))
            if schema.provider_column is not None:
                row.append(record.provider_id)
            if schema.service_column is not None:
                row.append(record.service_id)
            writer.writerow(row)
            count += 1
    return count
