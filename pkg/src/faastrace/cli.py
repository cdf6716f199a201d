"""Command-line pipeline: analyze traces, report, generate schedules.

Subcommands bind the library into the measurement workflow: ``analyze``
streams trace documents into per-trace records and segment exports,
``report`` folds records into warm/cold/tail latency reports,
``upscale`` and ``pattern`` emit per-second invocation schedules,
``validate-load`` compares planned against observed schedules, and
``synth`` produces seeded trace corpora with ground truth.

Exit codes: 0 success, 1 internal error, 2 input error, 3 empty result.
All outputs use LF newlines regardless of platform so repeated runs are
byte-identical.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .aggregate import (
    EmptyFilterError,
    TraceRecord,
    cold_penalty,
    discard_warmup,
    summarize,
    tail_penalty,
)
from .breakdown import Category, CategoryMap, LatencyBreakdown, aggregate, extract_breakdown
from .critical_path import TemporalConfig, extract
from .loadcheck import LoadVerdict, validate_load
from .synth import TraceSpec, generate
from .trace_model import (
    ColdStatus,
    TraceParseError,
    Verdict,
    cold_status,
    import_xray,
    parse_canonical,
    serialize,
    validate,
)
from .workload import (
    PATTERN_KINDS,
    MinuteSeries,
    PatternSpec,
    UpscaleConfig,
    synth_pattern,
    upscale,
)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_EMPTY = 3

RECORD_FIELDS = ("trace_id", "e2e_us", "cold", "valid", "has_exception", "wall_time")
SEGMENT_HEADER = "trace_id,index,start_us,end_us,duration_us,category,owner,case"
VERDICT_HEADER = (
    "comparison,dtw_distance,normalized_distance,total_deviation,"
    "passed,deviation_threshold,distance_bound"
)


@dataclass(frozen=True)
class RunConfig:
    """Validated shared knobs for one invocation."""

    subcommand: str
    margin_us: int = 1000
    percentiles: tuple[float, ...] = (0.5,)
    warmup_s: float = 60.0
    seed: int = 0
    radius: int = 10
    deviation_threshold: float = 0.10
    distance_bound: float = 1.0
    category_map_path: str | None = None

    def __post_init__(self):
        if self.margin_us < 0:
            raise ValueError("margin must be non-negative")
        if self.warmup_s < 0:
            raise ValueError("warmup window must be non-negative")
        if self.radius < 0:
            raise ValueError("radius must be non-negative")
        for p in self.percentiles:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"percentile must be in [0, 1], got {p}")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        fields = {
            "margin_us": getattr(args, "margin_us", 1000),
            "percentiles": tuple(getattr(args, "percentile", None) or (0.5,)),
            "warmup_s": getattr(args, "warmup_s", 60.0),
            "seed": getattr(args, "seed", 0),
            "radius": getattr(args, "radius", 10),
            "deviation_threshold": getattr(args, "deviation_threshold", 0.10),
            "distance_bound": getattr(args, "distance_bound", 1.0),
            "category_map_path": getattr(args, "category_map", None),
        }
        return cls(subcommand=args.subcommand, **fields)


def _open_out(path: str | None) -> IO[str]:
    if path in (None, "-"):
        return sys.stdout
    return open(path, "w", encoding="utf-8", newline="")


def _close_out(handle: IO[str]) -> None:
    if handle is not sys.stdout:
        handle.close()


def _load_category_map(path: str | None) -> CategoryMap:
    if path is None:
        return CategoryMap()
    with open(path, "r", encoding="utf-8") as fh:
        overrides = json.load(fh)
    if not isinstance(overrides, dict):
        raise ValueError("category map must be a JSON object of kind: category")
    return CategoryMap.from_overrides(overrides)


def _fraction(value: float) -> str:
    return f"{value:.6f}"


def _filter_cell(desc: str) -> str:
    return desc.replace(", ", ";")


def _record_header() -> str:
    return ",".join(RECORD_FIELDS + tuple(c.value for c in Category))


def _record_row(record: TraceRecord) -> str:
    cells = [
        record.trace_id,
        str(record.e2e_us),
        record.cold.value,
        "true" if record.valid else "false",
        "true" if record.has_exception else "false",
        f"{record.wall_time:.6f}",
    ]
    cells.extend(str(record.aggregated.get(c, 0)) for c in Category)
    return ",".join(cells)


def _segment_rows(trace_id: str, breakdown: LatencyBreakdown) -> Iterable[str]:
    for index, seg in enumerate(breakdown.segments):
        yield (
            f"{trace_id},{index},{seg.start_us},{seg.end_us},"
            f"{seg.duration_us},{seg.category.value},{seg.owner},{seg.case.value}"
        )


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = TemporalConfig(margin_us=args.margin_us)
    category_map = _load_category_map(args.category_map)
    parse = parse_canonical if args.format == "canonical" else import_xray

    n_docs = 0
    n_records = 0
    n_invalid = 0
    with open(args.input, "r", encoding="utf-8") as fh:
        seg_out = _open_out(args.segments_out) if args.segments_out else None
        rec_out = _open_out(args.records_out)
        try:
            if seg_out is not None:
                seg_out.write(SEGMENT_HEADER + "\n")
            rec_out.write(_record_header() + "\n")
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                n_docs += 1
                try:
                    trace = parse(line)
                    report = validate(trace, margin_us=args.margin_us)
                    path = extract(trace, cfg)
                    breakdown = extract_breakdown(trace, path, cfg, category_map)
                except (TraceParseError, ValueError) as exc:
                    n_invalid += 1
                    print(f"invalid line {lineno}: {exc}", file=sys.stderr)
                    continue
                record = TraceRecord(
                    trace_id=trace.trace_id,
                    aggregated=aggregate(breakdown),
                    e2e_us=breakdown.e2e_us,
                    cold=cold_status(trace, path),
                    valid=report.verdict is Verdict.VALID,
                    has_exception=report.has_exception,
                    wall_time=trace.root.start_us / 1e6,
                )
                if not record.valid:
                    n_invalid += 1
                rec_out.write(_record_row(record) + "\n")
                if seg_out is not None:
                    for row in _segment_rows(trace.trace_id, breakdown):
                        seg_out.write(row + "\n")
                n_records += 1
        finally:
            _close_out(rec_out)
            if seg_out is not None:
                _close_out(seg_out)
    if n_docs == 0:
        print("no trace documents in input", file=sys.stderr)
        return EXIT_INPUT
    summary = f"analyzed={n_docs} records={n_records} invalid={n_invalid}"
    print(summary, file=sys.stderr if args.records_out is None else sys.stdout)
    return EXIT_OK


def _parse_bool(cell: str) -> bool:
    return cell == "true"


def read_records(path: str) -> list[TraceRecord]:
    """Read back an analyze records export."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != _record_header():
            raise ValueError(f"unrecognized records header in {path}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != len(RECORD_FIELDS) + len(list(Category)):
                raise ValueError(f"malformed records row: {line!r}")
            fixed = cells[: len(RECORD_FIELDS)]
            per_category = cells[len(RECORD_FIELDS) :]
            records.append(
                TraceRecord(
                    trace_id=fixed[0],
                    aggregated={
                        c: int(v) for c, v in zip(Category, per_category)
                    },
                    e2e_us=int(fixed[1]),
                    cold=ColdStatus(fixed[2]),
                    valid=_parse_bool(fixed[3]),
                    has_exception=_parse_bool(fixed[4]),
                    wall_time=float(fixed[5]),
                )
            )
    return records


def cmd_report(args: argparse.Namespace) -> int:
    records = read_records(args.records)
    kept = discard_warmup(records, window_s=args.warmup_s)
    percentiles = tuple(args.percentile or [0.5])

    lines = ["section,percentile,category,value_us,fraction,count,filter"]
    for p in percentiles:
        warm = summarize(kept, percentile=p, cold=ColdStatus.WARM)
        for category in Category:
            lines.append(
                f"warm,{p},{category.value},{warm.values_us[category]},"
                f"{_fraction(warm.fractions[category])},{warm.count},"
                f"{_filter_cell(warm.filter_desc)}"
            )
    warm_median = summarize(kept, percentile=0.5, cold=ColdStatus.WARM)
    cold_median = summarize(kept, percentile=0.5, cold=ColdStatus.COLD)
    penalty = cold_penalty(warm_median, cold_median)
    for category in Category:
        lines.append(
            f"cold_penalty,0.5,{category.value},{penalty.diffs_us[category]},"
            f"{_fraction(penalty.fractions[category])},{cold_median.count},"
            f"total_us={penalty.total_us}"
        )
    tail = tail_penalty(kept)
    for category in Category:
        lines.append(
            f"tail_penalty,,{category.value},{tail.diffs_us[category]},"
            f"{_fraction(tail.fractions[category])},{warm_median.count},"
            f"total_us={tail.total_us}"
        )
    out = _open_out(args.out)
    try:
        out.write("\n".join(lines) + "\n")
    finally:
        _close_out(out)
    return EXIT_OK


def _read_counts(path: str, column: int | None, skip_header: bool) -> list[str]:
    cells = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if skip_header and lineno == 1:
                continue
            line = line.strip()
            if not line:
                continue
            if column is None:
                cells.append(line)
            else:
                parts = line.split(",")
                if column >= len(parts):
                    raise ValueError(
                        f"{path}:{lineno}: no column {column} in {line!r}"
                    )
                cells.append(parts[column].strip())
    return cells


def _read_schedule(path: str) -> np.ndarray:
    """Read a per-second schedule: 'index,rate' rows or one rate per line."""
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            cell = parts[1] if len(parts) >= 2 else parts[0]
            try:
                values.append(float(cell))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: not a rate: {cell!r}") from exc
    return np.asarray(values, dtype=np.float64)


def _write_schedule(out: IO[str], rates: Sequence[int]) -> None:
    for second, rate in enumerate(rates):
        out.write(f"{second},{rate}\n")


def cmd_upscale(args: argparse.Namespace) -> int:
    raw = _read_counts(args.minutes, args.column, args.skip_header)
    try:
        counts = [int(c) for c in raw]
    except ValueError as exc:
        raise ValueError(f"minute counts must be integers: {exc}") from exc
    minutes = MinuteSeries.of(counts)
    cfg = UpscaleConfig(hurst=args.hurst, amplitude=args.amplitude, seed=args.seed)
    series = upscale(minutes, cfg)
    if args.check:
        sums = np.asarray(series.rates).reshape(len(minutes), 60).sum(axis=1)
        if not np.array_equal(sums, np.asarray(counts)):
            print("conservation check failed", file=sys.stderr)
            return EXIT_INTERNAL
        print(f"conservation OK ({len(minutes)} minutes)", file=sys.stderr)
    out = _open_out(args.out)
    try:
        _write_schedule(out, series.rates)
    finally:
        _close_out(out)
    return EXIT_OK


def cmd_pattern(args: argparse.Namespace) -> int:
    spec = PatternSpec(
        kind=args.kind,
        average_rate=args.rate,
        duration_s=args.duration,
        seed=args.seed,
    )
    series = synth_pattern(spec)
    out = _open_out(args.out)
    try:
        _write_schedule(out, series.rates)
    finally:
        _close_out(out)
    return EXIT_OK


def _verdict_row(name: str, verdict: LoadVerdict) -> str:
    deviation = (
        "inf" if math.isinf(verdict.total_deviation)
        else _fraction(verdict.total_deviation)
    )
    return (
        f"{name},{verdict.dtw_distance:.6f},{verdict.normalized_distance:.6f},"
        f"{deviation},{'true' if verdict.passed else 'false'},"
        f"{_fraction(verdict.deviation_threshold)},{_fraction(verdict.distance_bound)}"
    )


def cmd_validate_load(args: argparse.Namespace) -> int:
    planned = _read_schedule(args.planned)
    sent = _read_schedule(args.sent)
    executed = _read_schedule(args.executed)
    first, second = validate_load(
        planned,
        sent,
        executed,
        radius=args.radius,
        deviation_threshold=args.deviation_threshold,
        distance_bound=args.distance_bound,
    )
    out = _open_out(args.out)
    try:
        out.write(VERDICT_HEADER + "\n")
        out.write(_verdict_row("planned_vs_sent", first) + "\n")
        out.write(_verdict_row("sent_vs_executed", second) + "\n")
    finally:
        _close_out(out)
    return EXIT_OK


def _truth_doc(trace_id: str, truth) -> str:
    doc = {
        "trace_id": trace_id,
        "path": list(truth.path),
        "cold": truth.cold.value,
        "has_undetectable": truth.has_undetectable,
        "segments": [
            {
                "start_us": s.start_us,
                "end_us": s.end_us,
                "category": s.category.value,
                "owner": s.owner,
                "case": s.case.value,
            }
            for s in truth.segments
        ],
    }
    return json.dumps(doc, separators=(",", ":"))


def cmd_synth(args: argparse.Namespace) -> int:
    out = _open_out(args.out)
    truth_out = _open_out(args.truth_out) if args.truth_out else None
    try:
        for i in range(args.count):
            spec = TraceSpec(
                seed=args.seed + i,
                max_depth=args.max_depth,
                max_children=args.max_children,
                async_probability=args.async_probability,
                cold_probability=args.cold_probability,
            )
            trace_id = f"{args.prefix}-{args.seed + i:05d}"
            start_us = round(i * args.spacing_s * 1e6)
            trace, truth = generate(spec, trace_id=trace_id, start_us=start_us)
            out.write(serialize(trace).decode("utf-8") + "\n")
            if truth_out is not None:
                truth_out.write(_truth_doc(trace_id, truth) + "\n")
    finally:
        _close_out(out)
        if truth_out is not None:
            _close_out(truth_out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faastrace",
        description="Critical-path latency analysis and workload tooling",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("analyze", help="validate, path, and breakdown per trace")
    p.add_argument("input", help="trace documents, one JSON per line")
    p.add_argument("--format", choices=("canonical", "xray"), default="canonical")
    p.add_argument("--margin-us", dest="margin_us", type=int, default=1000)
    p.add_argument("--category-map", dest="category_map", default=None,
                   help="JSON object overriding span-kind categories")
    p.add_argument("--records-out", dest="records_out", default=None,
                   help="per-trace aggregate rows (default stdout)")
    p.add_argument("--segments-out", dest="segments_out", default=None,
                   help="per-segment rows (omitted unless set)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="warm/cold/tail reports from records")
    p.add_argument("records", help="records export from analyze")
    p.add_argument("--percentile", action="append", type=float, default=None)
    p.add_argument("--warmup-s", dest="warmup_s", type=float, default=60.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("upscale", help="per-minute counts to per-second rates")
    p.add_argument("minutes", help="one count per line, or CSV with --column")
    p.add_argument("--column", type=int, default=None)
    p.add_argument("--skip-header", dest="skip_header", action="store_true")
    p.add_argument("--hurst", type=float, default=0.8)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--check", action="store_true",
                   help="verify per-minute conservation after upscaling")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_upscale)

    p = sub.add_parser("pattern", help="named invocation pattern schedule")
    p.add_argument("kind", choices=PATTERN_KINDS)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--duration", type=int, default=1200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_pattern)

    p = sub.add_parser("validate-load", help="planned vs sent vs executed")
    p.add_argument("--planned", required=True)
    p.add_argument("--sent", required=True)
    p.add_argument("--executed", required=True)
    p.add_argument("--radius", type=int, default=10)
    p.add_argument("--deviation-threshold", dest="deviation_threshold",
                   type=float, default=0.10)
    p.add_argument("--distance-bound", dest="distance_bound",
                   type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_validate_load)

    p = sub.add_parser("synth", help="seeded synthetic trace corpus")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-depth", dest="max_depth", type=int, default=6)
    p.add_argument("--max-children", dest="max_children", type=int, default=4)
    p.add_argument("--async-probability", dest="async_probability",
                   type=float, default=0.3)
    p.add_argument("--cold-probability", dest="cold_probability",
                   type=float, default=0.0)
    p.add_argument("--spacing-s", dest="spacing_s", type=float, default=0.0,
                   help="root start offset between consecutive traces")
    p.add_argument("--prefix", default="synth")
    p.add_argument("--out", default=None)
    p.add_argument("--truth-out", dest="truth_out", default=None)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        RunConfig.from_args(args)
        return args.func(args)
    except EmptyFilterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (TraceParseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
