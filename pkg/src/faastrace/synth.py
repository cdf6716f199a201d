"""Synthetic trace generator with ground truth by construction.

The generator builds causal trees by simulating a platform schedule:
every parent runs a lead phase, invokes synchronous children strictly
sequentially inside its interval, then fires asynchronous children whose
spans end decisively beyond its own end.  Because all temporal relations
are placed far from the comparison margins, the generator knows the
critical path, the segment attribution, and the cold status of each
trace without re-running the analysis algorithms: the ground truth is
recorded from the construction itself.

Scheduling constraints that keep the truth well defined:

* Siblings never overlap: each child starts after the previous child's
  own end, so children sorted by end time equal schedule order.
* An asynchronous child outlives its parent by a decisive gap; only the
  first asynchronous child may start inside the parent (overlap case),
  later ones necessarily start beyond it (trigger-gap case).
* The span with the globally latest end is separated from the runner-up,
  so small clock skew cannot change which chain the path follows.

An asynchronous invocation that ends inside its parent (undetectable
from timestamps alone) is only generated behind ``undetectable_async``
and is recorded as synchronous, since no observer can do better.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .breakdown import CaseLabel, Category, CategoryMap, Segment, GAP_OWNER
from .trace_model import ColdStatus, ExecutionTrace, SpanKind, TraceSpan

# Decisive temporal separations, in microseconds.  The default analysis
# margin is 1000us and skew tests perturb boundaries by up to 400us each,
# so relations placed at least 2500us from any comparison threshold
# survive both.
_MIN_GAP = 800
_ASYNC_EXCEED = 2_500
_MAX_LAST_END_TIE = 3_000

_SYNC = "sync"
_ASYNC1 = "async1"
_ASYNC2 = "async2"

_DEFAULT_ROOT_MIX: tuple[tuple[SpanKind, float], ...] = (
    (SpanKind.ORCHESTRATOR, 0.5),
    (SpanKind.FUNCTION, 0.3),
    (SpanKind.CLIENT, 0.2),
)

_DEFAULT_MIX: dict[SpanKind, float] = {
    SpanKind.FUNCTION: 0.45,
    SpanKind.EXTERNAL_SERVICE: 0.2,
    SpanKind.ORCHESTRATOR: 0.15,
    SpanKind.QUEUE: 0.1,
    SpanKind.GENERIC: 0.1,
}


@dataclass(frozen=True)
class TraceSpec:
    """Knobs for one synthetic trace."""

    seed: int = 0
    max_depth: int = 6
    max_children: int = 4
    async_probability: float = 0.3
    trigger_gap_us: tuple[int, int] = (2_000, 80_000)
    service_mix: Mapping[SpanKind, float] | None = None
    cold_probability: float = 0.0
    undetectable_async: bool = False


@dataclass(frozen=True)
class GroundTruth:
    """What the generator knows to be true about its trace."""

    path: tuple[str, ...]
    segments: tuple[Segment, ...]
    cold: ColdStatus
    has_undetectable: bool = False


class _Node:
    __slots__ = ("id", "kind", "start", "end", "parent", "children", "edge")

    def __init__(self, node_id: str, kind: SpanKind, parent: "_Node | None", edge: str):
        self.id = node_id
        self.kind = kind
        self.parent = parent
        self.edge = edge  # how this node was invoked: sync | async1 | async2
        self.children: list[_Node] = []
        self.start = 0
        self.end = 0


def _draw_kind(rng: np.random.Generator, mix: Mapping[SpanKind, float]) -> SpanKind:
    kinds = list(mix)
    weights = np.array([mix[k] for k in kinds], dtype=float)
    weights /= weights.sum()
    return kinds[int(rng.choice(len(kinds), p=weights))]


class _Builder:
    def __init__(self, spec: TraceSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        self.mix = dict(spec.service_mix) if spec.service_mix else dict(_DEFAULT_MIX)
        self.nodes: list[_Node] = []
        self.budget = int(rng.integers(6, 46))
        self.counter = 0
        self.has_undetectable = False

    def new_node(self, kind: SpanKind, parent: _Node | None, edge: str) -> _Node:
        node = _Node(f"s{self.counter:03d}", kind, parent, edge)
        self.counter += 1
        self.budget -= 1
        self.nodes.append(node)
        if parent is not None:
            parent.children.append(node)
        return node

    def u(self, lo: int, hi: int) -> int:
        return int(self.rng.integers(lo, hi + 1))

    def build(self, start_us: int) -> _Node:
        root_kinds, root_weights = zip(*_DEFAULT_ROOT_MIX)
        kind = root_kinds[int(self.rng.choice(len(root_kinds), p=root_weights))]
        root = self.new_node(kind, None, _SYNC)
        self.place(root, start_us, depth=0, floor=0)
        return root

    def place(self, node: _Node, start: int, depth: int, floor: int) -> None:
        """Assign the subtree under ``node`` beginning at ``start``.

        ``floor`` is the minimum end for every span in this subtree: once
        an asynchronous edge is crossed, all descendants must end
        decisively beyond that edge's parent, or a later unwind past the
        parent would compare a path tail against an ancestor end inside
        the margin and the ground truth would stop being decisive.
        """
        rng = self.rng
        spec = self.spec
        node.start = start
        n_children = 0
        if depth < spec.max_depth and self.budget > 0:
            n_children = min(int(rng.integers(0, spec.max_children + 1)), self.budget)
            if depth == 0 and n_children == 0:
                n_children = min(1, self.budget)
        n_async = sum(
            1 for _ in range(n_children) if rng.random() < spec.async_probability
        )
        n_sync = n_children - n_async
        async_intents: list[str] = []
        for j in range(n_async):
            if j == 0 and rng.random() < 0.5:
                async_intents.append(_ASYNC1)
            else:
                async_intents.append(_ASYNC2)

        cursor = start + self.u(_MIN_GAP, 20_000)  # lead phase
        sync_children: list[_Node] = []
        if node.kind is SpanKind.FUNCTION and rng.random() < spec.cold_probability:
            # Cold invocation: initialization runs first, inside the span.
            if rng.random() < 0.5 and self.budget > 1:
                sync_children.append(self.new_node(SpanKind.CONTAINER_INIT, node, _SYNC))
            if self.budget > 0:
                sync_children.append(self.new_node(SpanKind.RUNTIME_INIT, node, _SYNC))
        for _ in range(n_sync):
            if self.budget <= 0:
                break
            sync_children.append(self.new_node(_draw_kind(rng, self.mix), node, _SYNC))
        for child in sync_children:
            self.place(child, cursor, depth + 1, floor)
            # Sequence on the child's whole subtree, not just the child:
            # deep asynchronous branches may end after the child itself,
            # and the next path hop must land strictly forward of them.
            cursor = _subtree_max(child) + self.u(_MIN_GAP, 12_000)

        wants_async1 = bool(async_intents) and async_intents[0] == _ASYNC1
        tail_lo = 2 * _ASYNC_EXCEED if wants_async1 else _MIN_GAP + 200
        end = cursor + self.u(tail_lo, tail_lo + 18_000)
        if end < floor:
            end = floor + self.u(0, 15_000)
        node.end = end

        if spec.undetectable_async and node.end - cursor > 3 * _ASYNC_EXCEED \
                and node.end - _ASYNC_EXCEED >= floor \
                and self.budget > 0 and rng.random() < 0.25:
            # Physically asynchronous but fully nested: indistinguishable
            # from a synchronous call, recorded as one.
            hidden = self.new_node(_draw_kind(rng, self.mix), node, _SYNC)
            hidden.start = cursor + _MIN_GAP
            hidden.end = node.end - _ASYNC_EXCEED
            self.has_undetectable = True
            cursor = hidden.end + _MIN_GAP

        prev_end: int | None = None
        for intent in async_intents:
            if self.budget <= 0:
                break
            gap = self.u(*spec.trigger_gap_us)
            if intent == _ASYNC1:
                lo = cursor + _MIN_GAP
                hi = node.end - _ASYNC_EXCEED
                if lo <= hi:
                    child_start = self.u(lo, min(hi, lo + 30_000))
                    edge = _ASYNC1
                else:
                    child_start = node.end + gap
                    edge = _ASYNC2
            else:
                base = node.end if prev_end is None else max(node.end, prev_end)
                child_start = base + gap
                edge = _ASYNC2
            if prev_end is not None and child_start <= prev_end + _MIN_GAP:
                child_start = prev_end + _MIN_GAP + gap
                edge = _ASYNC2
            child = self.new_node(_draw_kind(rng, self.mix), node, edge)
            self.place(
                child,
                child_start,
                depth + 1,
                floor=node.end + _ASYNC_EXCEED + self.u(0, 25_000),
            )
            prev_end = _subtree_max(child)


def _subtree_max(node: _Node) -> int:
    latest = node.end
    stack = list(node.children)
    while stack:
        sub = stack.pop()
        if sub.end > latest:
            latest = sub.end
        stack.extend(sub.children)
    return latest


def _last_end_separated(nodes: list[_Node]) -> bool:
    """Keep the globally latest end decisively ahead of the runner-up.

    The root may be stretched freely (nothing is scheduled after it); any
    other near-tie is reported so the caller can redraw the trace, since
    stretching an inner span could overtake a sibling placed after it.
    """
    ends = sorted((n.end for n in nodes), reverse=True)
    if len(ends) < 2 or ends[0] - ends[1] >= _MAX_LAST_END_TIE:
        return True
    winner = max(nodes, key=lambda n: (n.end, n.start, n.id))
    if winner.parent is None:
        winner.end += 5_000
        return True
    return False


def _truth_path(root: _Node) -> list[_Node]:
    last = max(
        _all_nodes(root), key=lambda n: (n.end, n.start, n.id)
    )
    path: list[_Node] = []

    def walk(node: _Node) -> None:
        path.append(node)
        kids = node.children
        for index, child in enumerate(kids):
            tail = path[-1]
            tail_beyond = tail.end > node.end
            if index < len(kids) - 1:
                if not tail_beyond:
                    walk(child)
            else:
                child_beyond = child.end > node.end
                if child_beyond:
                    if _contains(child, last):
                        walk(child)
                elif not tail_beyond:
                    walk(child)

    walk(root)
    return path


def _all_nodes(root: _Node) -> list[_Node]:
    out = [root]
    stack = [root]
    while stack:
        node = stack.pop()
        out.extend(node.children)
        stack.extend(node.children)
    return out


def _contains(node: _Node, target: _Node) -> bool:
    up: _Node | None = target
    while up is not None:
        if up is node:
            return True
        up = up.parent
    return False


def _truth_segments(path: list[_Node], cmap: CategoryMap) -> list[Segment]:
    e2e_end = max(n.end for n in path)
    cursor = path[0].start
    segments: list[Segment] = []

    def emit(boundary: int, category: Category, owner: str, case: CaseLabel) -> None:
        nonlocal cursor
        segments.append(Segment(cursor, boundary, category, owner, case))
        cursor = boundary

    for cur, nxt in zip(path, path[1:]):
        if nxt.parent is cur:
            if nxt.edge == _SYNC:
                emit(nxt.start, cmap.category_for(cur.kind), cur.id, CaseLabel.SYNC1)
            elif nxt.edge == _ASYNC1:
                emit(nxt.start, cmap.category_for(cur.kind), cur.id, CaseLabel.ASYNC1)
            else:
                emit(cur.end, cmap.category_for(cur.kind), cur.id, CaseLabel.WITHIN)
                emit(nxt.start, Category.TRIGGER, GAP_OWNER, CaseLabel.ASYNC2)
        else:
            emit(cur.end, cmap.category_for(cur.kind), cur.id, CaseLabel.WITHIN)
            lca = _lca(cur, nxt)
            emit(nxt.start, cmap.category_for(lca.kind), lca.id, CaseLabel.SYNC2)
    last = path[-1]
    emit(last.end, cmap.category_for(last.kind), last.id, CaseLabel.WITHIN)
    anc = last.parent
    while anc is not None:
        if anc.end > cursor:
            emit(
                min(anc.end, e2e_end),
                cmap.category_for(anc.kind, trailing=True),
                anc.id,
                CaseLabel.TRAILING,
            )
        anc = anc.parent
    return segments


def _lca(a: _Node, b: _Node) -> _Node:
    line = set()
    up: _Node | None = a
    while up is not None:
        line.add(id(up))
        up = up.parent
    up = b
    while up is not None:
        if id(up) in line:
            return up
        up = up.parent
    raise AssertionError("nodes share no ancestor")


def _has_init_descendant(node: _Node) -> bool:
    stack = list(node.children)
    while stack:
        sub = stack.pop()
        if sub.kind in (SpanKind.RUNTIME_INIT, SpanKind.CONTAINER_INIT):
            return True
        stack.extend(sub.children)
    return False


def _truth_cold(path: list[_Node]) -> ColdStatus:
    # A function is cold when initialization ran anywhere beneath it, so
    # a warm wrapper over a cold invocation counts as cold too.
    statuses = [
        _has_init_descendant(n) for n in path if n.kind is SpanKind.FUNCTION
    ]
    if not statuses:
        return ColdStatus.WARM
    if all(statuses):
        return ColdStatus.COLD
    if not any(statuses):
        return ColdStatus.WARM
    return ColdStatus.PARTIAL


def generate(
    spec: TraceSpec,
    *,
    trace_id: str | None = None,
    start_us: int = 0,
) -> tuple[ExecutionTrace, GroundTruth]:
    """Generate one trace plus its construction-time ground truth."""
    rng = np.random.default_rng(spec.seed)
    for _ in range(20):
        builder = _Builder(spec, rng)
        root = builder.build(start_us)
        if _last_end_separated(builder.nodes):
            break
    path = _truth_path(root)
    segments = _truth_segments(path, CategoryMap())
    truth = GroundTruth(
        path=tuple(n.id for n in path),
        segments=tuple(segments),
        cold=_truth_cold(path),
        has_undetectable=builder.has_undetectable,
    )
    spans = [
        TraceSpan(
            id=n.id,
            parent_id=n.parent.id if n.parent is not None else None,
            name=f"{n.kind.value}-{n.id}",
            kind=n.kind,
            start_us=n.start,
            end_us=n.end,
        )
        for n in builder.nodes
    ]
    tid = trace_id if trace_id is not None else f"synth-{spec.seed}"
    return ExecutionTrace(tid, spans), truth


def inject_skew(
    trace: ExecutionTrace, magnitude_us: int, seed: int = 0
) -> ExecutionTrace:
    """Perturb every span boundary by uniform noise in +-magnitude.

    Start and end are shifted independently; a span whose end would cross
    its start is clamped to zero duration so spans stay well formed.
    """
    rng = np.random.default_rng(seed)
    spans = []
    for span in trace.spans:
        start = span.start_us + int(rng.integers(-magnitude_us, magnitude_us + 1))
        end = span.end_us + int(rng.integers(-magnitude_us, magnitude_us + 1))
        if end < start:
            end = start
        spans.append(
            TraceSpan(
                id=span.id,
                parent_id=span.parent_id,
                name=span.name,
                kind=span.kind,
                start_us=start,
                end_us=end,
                error=span.error,
                attributes=span.attributes,
            )
        )
    return ExecutionTrace(trace.trace_id, spans)
