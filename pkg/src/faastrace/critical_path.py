"""Critical-path extraction over causal span trees.

The critical path is the duration-weighted longest causal chain: it starts
at the root and ends at the span with the trace-wide latest end time,
crossing synchronous child chains and detected asynchronous hand-offs.

Temporal relations are decided with a clock-skew margin.  ``happens_before``
is lenient (ordering within the margin still counts as ordered) while
``is_async`` demands strict exceedance beyond the margin, so a child must
clearly outlive its parent before a hand-off is treated as asynchronous.
An asynchronous invocation that ends inside its parent's interval is
structurally indistinguishable from a synchronous call and is deliberately
treated as one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .trace_model import ExecutionTrace, TraceSpan

DEFAULT_MARGIN_US = 1000


@dataclass(frozen=True)
class TemporalConfig:
    """Clock-skew tolerance for temporal comparisons, in microseconds."""

    margin_us: int = DEFAULT_MARGIN_US


def happens_before(current: TraceSpan, nxt: TraceSpan, cfg: TemporalConfig) -> bool:
    """True when ``current`` completes before ``nxt`` begins, leniently."""
    return current.end_us < nxt.start_us + cfg.margin_us


def is_async(current: TraceSpan, nxt: TraceSpan, cfg: TemporalConfig) -> bool:
    """True when ``nxt`` outlives ``current`` beyond the margin."""
    return nxt.end_us > current.end_us + cfg.margin_us


class AncestorStack:
    """Ancestor chain of the last-ending span; the root sits on top.

    Popping therefore consumes the chain root-first, mirroring the descent
    of the extraction walk; the last-ending span itself is at the bottom.
    """

    __slots__ = ("_ids",)

    def __init__(self, ids_top_first: tuple[str, ...]):
        self._ids = list(reversed(ids_top_first))

    @property
    def ids(self) -> tuple[str, ...]:
        """Remaining ids, top first."""
        return tuple(reversed(self._ids))

    def top(self) -> str | None:
        return self._ids[-1] if self._ids else None

    def pop(self) -> str:
        return self._ids.pop()

    def __len__(self) -> int:
        return len(self._ids)

    def __bool__(self) -> bool:
        return bool(self._ids)


@dataclass(frozen=True)
class CriticalPath:
    """Ordered span ids on the critical path, root first."""

    span_ids: tuple[str, ...]

    def __iter__(self) -> Iterator[str]:
        return iter(self.span_ids)

    def __len__(self) -> int:
        return len(self.span_ids)

    def __getitem__(self, index: int) -> str:
        return self.span_ids[index]

    @property
    def last(self) -> str:
        return self.span_ids[-1]


def last_ending_span(trace: ExecutionTrace) -> TraceSpan:
    """Span with the latest end; ties fall to latest start, then id."""
    return max(trace.spans, key=lambda s: (s.end_us, s.start_us, s.id))


def build_stack(trace: ExecutionTrace) -> AncestorStack:
    """Stack of the last-ending span and all its ancestors, root on top."""
    last = last_ending_span(trace)
    chain = [last.id]
    chain.extend(a.id for a in trace.ancestors_of(last.id))
    chain.reverse()
    return AncestorStack(tuple(chain))


def _sorted_children(trace: ExecutionTrace, span_id: str) -> list[TraceSpan]:
    kids = [trace.span(cid) for cid in trace.children_of(span_id)]
    kids.sort(key=lambda s: (s.end_us, s.start_us, s.id))
    return kids


def extract(trace: ExecutionTrace, cfg: TemporalConfig | None = None) -> CriticalPath:
    """Extract the critical path of ``trace``.

    Pre-order walk from the root.  At each span, children are visited in
    ascending (end, start, id) order: a non-last child is entered iff it
    happens-before the last child and the transition from the current path
    tail is not asynchronous; the last child is entered iff it is a
    detected asynchronous hand-off matching the ancestor stack top, or a
    synchronous one with a synchronous path tail.

    The walk is iterative, so tree depth is bounded by memory rather than
    the interpreter recursion limit.
    """
    if cfg is None:
        cfg = TemporalConfig()
    stack = build_stack(trace)
    path: list[TraceSpan] = []

    # Each frame is [span, sorted children, next child index]; entering a
    # span appends it to the path and may pop the ancestor stack, exactly
    # like the recursive formulation.
    frames: list[list] = []

    def enter(span: TraceSpan) -> None:
        path.append(span)
        if stack.top() == span.id:
            stack.pop()
        kids = _sorted_children(trace, span.id)
        if kids:
            frames.append([span, kids, 0])

    enter(trace.root)
    while frames:
        frame = frames[-1]
        span, kids, index = frame
        if index >= len(kids):
            frames.pop()
            continue
        frame[2] += 1
        child = kids[index]
        last_child = kids[-1]
        tail = path[-1]
        if index < len(kids) - 1:
            if happens_before(child, last_child, cfg) and not is_async(span, tail, cfg):
                enter(child)
        else:
            async_hop = is_async(span, last_child, cfg)
            if async_hop:
                if stack.top() == last_child.id:
                    enter(last_child)
            elif not is_async(span, tail, cfg):
                enter(last_child)
    return CriticalPath(tuple(s.id for s in path))
