"""Corpus-level aggregation of per-trace latency breakdowns.

One trace folds into one :class:`TraceRecord` row; record sets fold into
percentile reports per category.  Percentiles are taken per category
independently (the figures of interest are per-category aggregates), so
category percentiles need not sum to the end-to-end percentile; report
fractions are therefore computed against the sum of the per-category
values and the reports say which filter produced them.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .breakdown import Category, CategoryMap, aggregate, extract_breakdown
from .critical_path import TemporalConfig, extract
from .trace_model import ColdStatus, ExecutionTrace, Verdict, cold_status, validate

logger = logging.getLogger(__name__)

TAIL_MIN_RECORDS = 100


class EmptyFilterError(ValueError):
    """No records survived the report's filter."""


@dataclass(frozen=True)
class TraceRecord:
    """One analyzed trace, reduced to the row used by reports.

    ``wall_time`` is the request start in epoch seconds; ``aggregated``
    maps every category to critical-path microseconds and sums to
    ``e2e_us``.
    """

    trace_id: str
    aggregated: Mapping[Category, int]
    e2e_us: int
    cold: ColdStatus
    valid: bool
    has_exception: bool
    wall_time: float


@dataclass(frozen=True)
class BreakdownReport:
    """Per-category percentile values and their share of the total."""

    percentile: float
    values_us: Mapping[Category, int]
    fractions: Mapping[Category, float]
    count: int
    filter_desc: str


@dataclass(frozen=True)
class PenaltyReport:
    """Per-category difference between two aggregate reports.

    Negative components are reported as-is; fractions are shares of the
    summed difference and sum to 1 when every component is positive.
    """

    diffs_us: Mapping[Category, int]
    fractions: Mapping[Category, float]
    total_us: int


def record_of(
    trace: ExecutionTrace,
    cfg: TemporalConfig | None = None,
    category_map: CategoryMap | None = None,
) -> TraceRecord:
    """Analyze one trace end to end and fold it into a record."""
    if cfg is None:
        cfg = TemporalConfig()
    report = validate(trace, margin_us=cfg.margin_us)
    path = extract(trace, cfg)
    breakdown = extract_breakdown(trace, path, cfg, category_map)
    return TraceRecord(
        trace_id=trace.trace_id,
        aggregated=aggregate(breakdown),
        e2e_us=breakdown.e2e_us,
        cold=cold_status(trace, path),
        valid=report.verdict is Verdict.VALID,
        has_exception=report.has_exception,
        wall_time=trace.root.start_us / 1e6,
    )


def percentile_nearest_rank(values: Sequence[int], p: float) -> int:
    """Nearest-rank percentile: the ceil(p*n)-th smallest value.

    No interpolation, so results stay exact integer microseconds.
    """
    if not values:
        raise ValueError("percentile of an empty sequence")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"percentile must be in [0, 1], got {p}")
    ordered = sorted(values)
    index = max(math.ceil(p * len(ordered)) - 1, 0)
    return ordered[index]


def _filter(
    records: Iterable[TraceRecord], cold: ColdStatus | None
) -> tuple[list[TraceRecord], str]:
    """Keep valid, exception-free records of the chosen cold status.

    ``cold=None`` admits both full warm and full cold invocations;
    partial cold starts are always excluded.
    """
    wanted = "warm or cold" if cold is None else cold.value
    desc = f"valid, exception-free, cold status {wanted}"
    kept = [
        r
        for r in records
        if r.valid
        and not r.has_exception
        and r.cold is not ColdStatus.PARTIAL
        and (cold is None or r.cold is cold)
    ]
    return kept, desc


def summarize(
    records: Iterable[TraceRecord],
    percentile: float = 0.5,
    cold: ColdStatus | None = None,
) -> BreakdownReport:
    """Per-category nearest-rank percentile over the filtered records."""
    kept, desc = _filter(records, cold)
    if not kept:
        raise EmptyFilterError(f"no records left after filter: {desc}")
    values = {
        category: percentile_nearest_rank(
            [r.aggregated.get(category, 0) for r in kept], percentile
        )
        for category in Category
    }
    total = sum(values.values())
    fractions = {
        category: (value / total if total else 0.0)
        for category, value in values.items()
    }
    return BreakdownReport(
        percentile=percentile,
        values_us=values,
        fractions=fractions,
        count=len(kept),
        filter_desc=desc,
    )


def _penalty(
    treatment: Mapping[Category, int], baseline: Mapping[Category, int]
) -> PenaltyReport:
    diffs = {
        category: treatment.get(category, 0) - baseline.get(category, 0)
        for category in Category
    }
    total = sum(diffs.values())
    fractions = {
        category: (diff / total if total else 0.0)
        for category, diff in diffs.items()
    }
    return PenaltyReport(diffs_us=diffs, fractions=fractions, total_us=total)


def cold_penalty(warm: BreakdownReport, cold: BreakdownReport) -> PenaltyReport:
    """Median latency added by cold starts, per category."""
    return _penalty(cold.values_us, warm.values_us)


def tail_penalty(records: Iterable[TraceRecord]) -> PenaltyReport:
    """p99 minus p50 per category over warm, valid records."""
    kept, desc = _filter(records, ColdStatus.WARM)
    if not kept:
        raise EmptyFilterError(f"no records left after filter: {desc}")
    if len(kept) < TAIL_MIN_RECORDS:
        logger.warning(
            "tail penalty over %d records; p99 needs at least %d to be meaningful",
            len(kept),
            TAIL_MIN_RECORDS,
        )
    p99 = summarize(kept, percentile=0.99, cold=ColdStatus.WARM)
    p50 = summarize(kept, percentile=0.5, cold=ColdStatus.WARM)
    return _penalty(p99.values_us, p50.values_us)


def discard_warmup(
    records: Iterable[TraceRecord], window_s: float = 60.0
) -> list[TraceRecord]:
    """Drop records within ``window_s`` of the earliest request start."""
    pool = list(records)
    if not pool:
        return []
    earliest = min(r.wall_time for r in pool)
    return [r for r in pool if r.wall_time >= earliest + window_s]
