"""Gap-free latency breakdown along a critical path.

The end-to-end window of a trace (root start to the latest end among
path spans) is partitioned into contiguous, non-overlapping segments.
Each segment is owned by a span (or by the platform, for trigger gaps)
and carries a latency category.  Durations are integer microseconds and
sum exactly to the end-to-end latency: the walk threads a single cursor
through the window, so conservation is structural, not approximate.

Segment cases mirror the path transition that produced them: a parent's
lead-in before a synchronous child (Sync1), the hop between siblings
across their common ancestor (Sync2), the overlapped lead-in before an
asynchronous child (Async1), the trigger gap before a detached one
(Async2), a span's own execution (Within), and ancestor time after the
path's last span (Trailing).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .critical_path import CriticalPath, TemporalConfig, is_async
from .trace_model import ExecutionTrace, SpanKind, TraceSpan

logger = logging.getLogger(__name__)

GAP_OWNER = "gap"


class BreakdownError(ValueError):
    """Raised when a path does not belong to the trace being broken down."""


class Category(str, Enum):
    """Latency categories, in stable report order."""

    COMPUTATION = "computation"
    EXTERNAL_SERVICE = "external_service"
    ORCHESTRATION = "orchestration"
    TRIGGER = "trigger"
    QUEUING = "queuing"
    CONTAINER_INITIALIZATION = "container_initialization"
    RUNTIME_INITIALIZATION = "runtime_initialization"
    FINALIZATION_OVERHEAD = "finalization_overhead"
    INSTRUMENTATION_OVERHEAD = "instrumentation_overhead"


class CaseLabel(str, Enum):
    WITHIN = "Within"
    SYNC1 = "Sync1"
    SYNC2 = "Sync2"
    ASYNC1 = "Async1"
    ASYNC2 = "Async2"
    TRAILING = "Trailing"


@dataclass(frozen=True)
class Segment:
    """One contiguous slice of the end-to-end window."""

    start_us: int
    end_us: int
    category: Category
    owner: str
    case: CaseLabel

    @property
    def duration_us(self) -> int:
        return self.end_us - self.start_us


_DEFAULT_BASE: dict[SpanKind, Category] = {
    SpanKind.CLIENT: Category.ORCHESTRATION,
    SpanKind.FUNCTION: Category.COMPUTATION,
    SpanKind.RUNTIME_INIT: Category.RUNTIME_INITIALIZATION,
    SpanKind.CONTAINER_INIT: Category.CONTAINER_INITIALIZATION,
    SpanKind.EXTERNAL_SERVICE: Category.EXTERNAL_SERVICE,
    SpanKind.ORCHESTRATOR: Category.ORCHESTRATION,
    SpanKind.QUEUE: Category.QUEUING,
    SpanKind.FINALIZATION: Category.FINALIZATION_OVERHEAD,
    SpanKind.INSTRUMENTATION: Category.INSTRUMENTATION_OVERHEAD,
    SpanKind.GENERIC: Category.COMPUTATION,
}


@dataclass(frozen=True)
class CategoryMap:
    """Total mapping from span kind (plus position context) to category.

    Two rules sit outside the table: queue spans always map to queuing,
    and a function owning trailing time maps to finalization overhead
    (post-response work such as log flushing).
    """

    base: Mapping[SpanKind, Category] = field(
        default_factory=lambda: dict(_DEFAULT_BASE)
    )

    def __post_init__(self) -> None:
        missing = [k for k in SpanKind if k not in self.base]
        if missing:
            merged = dict(_DEFAULT_BASE)
            merged.update(self.base)
            object.__setattr__(self, "base", merged)

    @classmethod
    def from_overrides(cls, overrides: Mapping[str, str]) -> "CategoryMap":
        base = dict(_DEFAULT_BASE)
        for kind_name, category_name in overrides.items():
            base[SpanKind(kind_name)] = Category(category_name)
        return cls(base=base)

    def category_for(self, kind: SpanKind, *, trailing: bool = False) -> Category:
        if kind is SpanKind.QUEUE:
            return Category.QUEUING
        if trailing and kind is SpanKind.FUNCTION:
            return Category.FINALIZATION_OVERHEAD
        return self.base[kind]


@dataclass(frozen=True)
class LatencyBreakdown:
    """Contiguous segments covering [e2e_start_us, e2e_end_us]."""

    segments: tuple[Segment, ...]
    e2e_start_us: int
    e2e_end_us: int

    @property
    def e2e_us(self) -> int:
        return self.e2e_end_us - self.e2e_start_us


def extract_breakdown(
    trace: ExecutionTrace,
    path: CriticalPath,
    cfg: TemporalConfig | None = None,
    category_map: CategoryMap | None = None,
) -> LatencyBreakdown:
    """Partition the end-to-end window along ``path``.

    ``path`` must have been extracted from ``trace`` with the same
    temporal config.  Segment boundaries are clamped forward so a margin
    artifact can only shorten a segment to zero length, never break
    contiguity; zero-length segments are kept (reporting drops them).
    """
    if cfg is None:
        cfg = TemporalConfig()
    if category_map is None:
        category_map = CategoryMap()
    if len(path) == 0:
        raise BreakdownError("empty critical path")
    for span_id in path:
        if span_id not in trace:
            raise BreakdownError(
                f"path span {span_id!r} does not belong to trace {trace.trace_id!r}"
            )
    spans = [trace.span(sid) for sid in path]
    if spans[0].id != trace.root.id:
        raise BreakdownError("critical path must start at the trace root")

    e2e_start = trace.root.start_us
    e2e_end = max(s.end_us for s in spans)
    segments: list[Segment] = []
    cursor = e2e_start

    def emit(boundary: int, category: Category, owner: str, case: CaseLabel) -> None:
        nonlocal cursor
        end = boundary
        if end < cursor:
            logger.warning(
                "trace %s: %s segment owned by %s clamped to zero "
                "(boundary %d before cursor %d)",
                trace.trace_id,
                case.value,
                owner,
                end,
                cursor,
            )
            end = cursor
        segments.append(Segment(cursor, end, category, owner, case))
        cursor = end

    for cur, nxt in zip(spans, spans[1:]):
        if nxt.parent_id == cur.id:
            if is_async(cur, nxt, cfg):
                if nxt.start_us > cur.end_us + cfg.margin_us:
                    # Detached hand-off: close the parent, then the
                    # platform-owned trigger gap.
                    emit(cur.end_us, category_map.category_for(cur.kind), cur.id, CaseLabel.WITHIN)
                    emit(nxt.start_us, Category.TRIGGER, GAP_OWNER, CaseLabel.ASYNC2)
                else:
                    emit(nxt.start_us, category_map.category_for(cur.kind), cur.id, CaseLabel.ASYNC1)
            else:
                emit(nxt.start_us, category_map.category_for(cur.kind), cur.id, CaseLabel.SYNC1)
        else:
            # Leaving a completed subtree: close the leaf, then attribute
            # the hop to the lowest common ancestor.
            emit(cur.end_us, category_map.category_for(cur.kind), cur.id, CaseLabel.WITHIN)
            lca = trace.lowest_common_ancestor(cur.id, nxt.id)
            emit(nxt.start_us, category_map.category_for(lca.kind), lca.id, CaseLabel.SYNC2)

    last = spans[-1]
    emit(last.end_us, category_map.category_for(last.kind), last.id, CaseLabel.WITHIN)
    for anc in trace.ancestors_of(last.id):
        if anc.end_us > cursor:
            emit(
                min(anc.end_us, e2e_end),
                category_map.category_for(anc.kind, trailing=True),
                anc.id,
                CaseLabel.TRAILING,
            )
    if cursor != e2e_end:
        raise BreakdownError(
            f"trace {trace.trace_id!r}: breakdown cursor stopped at {cursor}, "
            f"expected {e2e_end}; path and trace disagree"
        )
    return LatencyBreakdown(
        segments=tuple(segments), e2e_start_us=e2e_start, e2e_end_us=e2e_end
    )


def aggregate(breakdown: LatencyBreakdown) -> dict[Category, int]:
    """Total microseconds per category; absent categories map to zero."""
    totals: dict[Category, int] = {category: 0 for category in Category}
    for segment in breakdown.segments:
        totals[segment.category] += segment.duration_us
    return totals
