"""Shared builders for trace-based tests."""
from __future__ import annotations

from faastrace import ExecutionTrace, SpanKind, TraceSpan


def mk_span(
    span_id: str,
    parent: str | None = None,
    *,
    kind: SpanKind = SpanKind.FUNCTION,
    start_ms: float | None = None,
    end_ms: float | None = None,
    start_us: int | None = None,
    end_us: int | None = None,
    name: str | None = None,
    error: bool = False,
    attributes: dict[str, str] | None = None,
) -> TraceSpan:
    if start_us is None:
        start_us = int(round((start_ms or 0) * 1000))
    if end_us is None:
        end_us = int(round((end_ms or 0) * 1000))
    return TraceSpan(
        id=span_id,
        parent_id=parent,
        name=name if name is not None else span_id,
        kind=kind,
        start_us=start_us,
        end_us=end_us,
        error=error,
        attributes=attributes or {},
    )


def mk_trace(trace_id: str, *spans: TraceSpan) -> ExecutionTrace:
    return ExecutionTrace(trace_id, list(spans))
