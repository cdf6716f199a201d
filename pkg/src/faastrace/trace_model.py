"""Span-tree trace model: canonical parsing, X-Ray-style import, validation.

A trace is a single-rooted causal tree of spans.  Every span except the
root names its parent, and every span must be reachable from the root.
All timestamps are integer microseconds; the model never stores floats,
so equality and ordering are exact.

Reserved attribute keys (``_meta.*``) carry import-time facts forward to
``validate``: ``_meta.in_progress`` marks a span imported without an end
time, ``_meta.raw_kind`` preserves an input kind that had no mapping.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fnmatch import fnmatchcase
from typing import Iterable, Iterator, Mapping, Sequence

logger = logging.getLogger(__name__)

META_IN_PROGRESS = "_meta.in_progress"
META_RAW_KIND = "_meta.raw_kind"


class TraceParseError(ValueError):
    """Raised when a document cannot be turned into a well-formed trace."""


class SpanKind(str, Enum):
    """Role of a span within the platform."""

    CLIENT = "client"
    FUNCTION = "function"
    RUNTIME_INIT = "runtime_init"
    CONTAINER_INIT = "container_init"
    EXTERNAL_SERVICE = "external_service"
    ORCHESTRATOR = "orchestrator"
    QUEUE = "queue"
    FINALIZATION = "finalization"
    INSTRUMENTATION = "instrumentation"
    GENERIC = "generic"


class ColdStatus(str, Enum):
    COLD = "cold"
    WARM = "warm"
    PARTIAL = "partial"


class Verdict(str, Enum):
    VALID = "valid"
    INVALID = "invalid"
    INCOMPLETE = "incomplete"


@dataclass(frozen=True)
class TraceSpan:
    """One timed operation in a trace.

    ``start_us``/``end_us`` are integer epoch microseconds.  ``start_us``
    is normally <= ``end_us``; malformed inputs may violate that, which
    ``validate`` reports as a negative duration rather than refusing to
    parse.
    """

    id: str
    parent_id: str | None
    name: str
    kind: SpanKind
    start_us: int
    end_us: int
    error: bool = False
    attributes: Mapping[str, str] = field(default_factory=dict)

    @property
    def duration_us(self) -> int:
        return self.end_us - self.start_us


@dataclass(frozen=True)
class Finding:
    """One coded validation finding."""

    code: str
    span_id: str | None
    message: str


@dataclass(frozen=True)
class ValidationReport:
    verdict: Verdict
    structural_errors: tuple[Finding, ...]
    temporal_anomalies: tuple[Finding, ...]
    has_exception: bool
    warnings: tuple[Finding, ...] = ()


class ExecutionTrace:
    """Immutable causal tree of spans with id and children indexes."""

    __slots__ = ("trace_id", "spans", "_by_id", "_children", "_root_id")

    def __init__(self, trace_id: str, spans: Sequence[TraceSpan]):
        if not trace_id:
            raise TraceParseError("trace_id must be a non-empty string")
        if not spans:
            raise TraceParseError(f"trace {trace_id!r} has no spans")
        by_id: dict[str, TraceSpan] = {}
        for span in spans:
            if span.id in by_id:
                raise TraceParseError(
                    f"trace {trace_id!r}: duplicate span id {span.id!r}"
                )
            by_id[span.id] = span
        roots = [s for s in spans if s.parent_id is None]
        if not roots:
            raise TraceParseError(f"trace {trace_id!r} has no root span")
        if len(roots) > 1:
            ids = ", ".join(repr(s.id) for s in roots)
            raise TraceParseError(f"trace {trace_id!r} has multiple roots: {ids}")
        children: dict[str, list[str]] = {s.id: [] for s in spans}
        for span in spans:
            if span.parent_id is None:
                continue
            if span.parent_id not in by_id:
                raise TraceParseError(
                    f"trace {trace_id!r}: span {span.id!r} references "
                    f"unknown parent {span.parent_id!r}"
                )
            children[span.parent_id].append(span.id)
        # Single root plus resolved parents still allows disconnected
        # parent cycles; reject anything unreachable from the root.
        seen = {roots[0].id}
        frontier = [roots[0].id]
        while frontier:
            nxt: list[str] = []
            for sid in frontier:
                for cid in children[sid]:
                    if cid not in seen:
                        seen.add(cid)
                        nxt.append(cid)
            frontier = nxt
        if len(seen) != len(spans):
            lost = next(s.id for s in spans if s.id not in seen)
            raise TraceParseError(
                f"trace {trace_id!r}: span {lost!r} is not reachable from the "
                "root (cycle or detached subtree)"
            )
        self.trace_id = trace_id
        self.spans = tuple(spans)
        self._by_id = by_id
        self._children = {sid: tuple(kids) for sid, kids in children.items()}
        self._root_id = roots[0].id

    @property
    def root(self) -> TraceSpan:
        return self._by_id[self._root_id]

    def span(self, span_id: str) -> TraceSpan:
        return self._by_id[span_id]

    def __contains__(self, span_id: str) -> bool:
        return span_id in self._by_id

    def __len__(self) -> int:
        return len(self.spans)

    def children_of(self, span_id: str) -> tuple[str, ...]:
        return self._children[span_id]

    def ancestors_of(self, span_id: str) -> Iterator[TraceSpan]:
        """Yield proper ancestors, nearest parent first."""
        parent_id = self._by_id[span_id].parent_id
        while parent_id is not None:
            parent = self._by_id[parent_id]
            yield parent
            parent_id = parent.parent_id

    def lowest_common_ancestor(self, a: str, b: str) -> TraceSpan:
        """Deepest span that is an ancestor-or-self of both ``a`` and ``b``."""
        line = {a}
        line.update(s.id for s in self.ancestors_of(a))
        if b in line:
            return self._by_id[b]
        for anc in self.ancestors_of(b):
            if anc.id in line:
                return anc
        raise KeyError(f"no common ancestor of {a!r} and {b!r}")

    def descendants_of(self, span_id: str) -> Iterator[TraceSpan]:
        """Yield all spans strictly below ``span_id``."""
        stack = list(self._children[span_id])
        while stack:
            sid = stack.pop()
            yield self._by_id[sid]
            stack.extend(self._children[sid])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExecutionTrace):
            return NotImplemented
        return self.trace_id == other.trace_id and self.spans == other.spans

    def __hash__(self) -> int:
        return hash((self.trace_id, self.spans))

    def __repr__(self) -> str:
        return f"ExecutionTrace({self.trace_id!r}, {len(self.spans)} spans)"


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise TraceParseError(message)


def _clean_attributes(raw: object, span_id: str) -> dict[str, str]:
    if raw is None:
        return {}
    _require(isinstance(raw, dict), f"span {span_id!r}: attributes must be an object")
    out: dict[str, str] = {}
    for key, value in raw.items():
        out[str(key)] = value if isinstance(value, str) else json.dumps(value)
    return out


def _span_from_obj(obj: object) -> TraceSpan:
    _require(isinstance(obj, dict), "span entries must be objects")
    assert isinstance(obj, dict)
    span_id = obj.get("id")
    _require(
        isinstance(span_id, str) and span_id != "",
        f"span id must be a non-empty string, got {span_id!r}",
    )
    parent_id = obj.get("parent_id")
    _require(
        parent_id is None or (isinstance(parent_id, str) and parent_id != ""),
        f"span {span_id!r}: parent_id must be a non-empty string or null",
    )
    name = obj.get("name", "")
    _require(isinstance(name, str), f"span {span_id!r}: name must be a string")
    attributes = _clean_attributes(obj.get("attributes"), span_id)
    raw_kind = obj.get("kind", SpanKind.GENERIC.value)
    try:
        kind = SpanKind(raw_kind)
    except ValueError:
        # Unknown kinds degrade to generic; validate() surfaces a warning.
        attributes[META_RAW_KIND] = str(raw_kind)
        kind = SpanKind.GENERIC
    times = []
    for key in ("start_us", "end_us"):
        value = obj.get(key)
        _require(
            isinstance(value, int) and not isinstance(value, bool),
            f"span {span_id!r}: {key} must be an integer microsecond timestamp",
        )
        times.append(value)
    error = obj.get("error", False)
    _require(isinstance(error, bool), f"span {span_id!r}: error must be a boolean")
    return TraceSpan(
        id=span_id,
        parent_id=parent_id,
        name=name,
        kind=kind,
        start_us=times[0],
        end_us=times[1],
        error=error,
        attributes=attributes,
    )


def parse_canonical(data: bytes | str) -> ExecutionTrace:
    """Parse one canonical JSON trace document.

    The document is an object with ``trace_id`` and a ``spans`` list; each
    span carries ``id``, optional ``parent_id``, ``name``, ``kind``,
    integer ``start_us``/``end_us``, optional ``error`` and ``attributes``.
    """
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise TraceParseError(f"malformed trace document: {exc}") from exc
    _require(isinstance(doc, dict), "trace document must be a JSON object")
    trace_id = doc.get("trace_id")
    _require(
        isinstance(trace_id, str) and trace_id != "",
        "trace_id must be a non-empty string",
    )
    raw_spans = doc.get("spans")
    _require(
        isinstance(raw_spans, list) and len(raw_spans) > 0,
        f"trace {trace_id!r}: spans must be a non-empty list",
    )
    return ExecutionTrace(trace_id, [_span_from_obj(o) for o in raw_spans])


def serialize(trace: ExecutionTrace) -> bytes:
    """Serialize to the canonical document; round-trips through parse."""
    spans = []
    for s in trace.spans:
        obj: dict[str, object] = {
            "id": s.id,
            "parent_id": s.parent_id,
            "name": s.name,
            "kind": s.kind.value,
            "start_us": s.start_us,
            "end_us": s.end_us,
            "error": s.error,
            "attributes": dict(s.attributes),
        }
        spans.append(obj)
    doc = {"trace_id": trace.trace_id, "spans": spans}
    return json.dumps(doc, separators=(",", ":"), sort_keys=False).encode("utf-8")


# --- X-Ray-style import -----------------------------------------------------

#: Mapping rules applied to imported segments, first match wins.  Each rule
#: tests one segment field against a glob pattern.  The table is
#: configuration: pass a custom rule list to distinguish e.g. container from
#: runtime initialization however the producing platform encodes it.
DEFAULT_KIND_RULES: tuple[tuple[str, str, SpanKind], ...] = (
    ("name", "Initialization", SpanKind.RUNTIME_INIT),
    ("name", "Container Initialization", SpanKind.CONTAINER_INIT),
    ("name", "Restore", SpanKind.RUNTIME_INIT),
    ("name", "Overhead", SpanKind.FINALIZATION),
    ("name", "Dwell Time", SpanKind.QUEUE),
    ("name", "Attempt", SpanKind.QUEUE),
    ("name", "Invocation", SpanKind.FUNCTION),
    ("origin", "AWS::Lambda::Function", SpanKind.FUNCTION),
    ("origin", "AWS::Lambda", SpanKind.ORCHESTRATOR),
    ("origin", "AWS::ApiGateway*", SpanKind.ORCHESTRATOR),
    ("origin", "AWS::StepFunctions*", SpanKind.ORCHESTRATOR),
    ("origin", "AWS::SQS*", SpanKind.QUEUE),
    ("origin", "AWS::SNS*", SpanKind.QUEUE),
    ("origin", "AWS::*", SpanKind.EXTERNAL_SERVICE),
    ("namespace", "aws", SpanKind.EXTERNAL_SERVICE),
    ("namespace", "remote", SpanKind.EXTERNAL_SERVICE),
)


def _seconds_to_us(value: float) -> int:
    """Epoch seconds to integer microseconds, half away from zero."""
    scaled = value * 1e6
    if scaled >= 0:
        return int(math.floor(scaled + 0.5))
    return -int(math.floor(-scaled + 0.5))


def _map_kind(
    rules: Sequence[tuple[str, str, SpanKind]],
    origin: str,
    namespace: str,
    name: str,
) -> SpanKind | None:
    fields = {"origin": origin, "namespace": namespace, "name": name}
    for fld, pattern, kind in rules:
        value = fields.get(fld, "")
        if value and fnmatchcase(value, pattern):
            return kind
    return None


def _walk_xray_segment(
    seg: dict,
    parent_id: str | None,
    rules: Sequence[tuple[str, str, SpanKind]],
    out: list[TraceSpan],
) -> None:
    span_id = seg.get("id")
    _require(
        isinstance(span_id, str) and span_id != "",
        f"segment id must be a non-empty string, got {span_id!r}",
    )
    name = str(seg.get("name", ""))
    origin = str(seg.get("origin", "") or "")
    namespace = str(seg.get("namespace", "") or "")
    start = seg.get("start_time")
    _require(
        isinstance(start, (int, float)) and not isinstance(start, bool),
        f"segment {span_id!r}: start_time must be numeric epoch seconds",
    )
    attributes: dict[str, str] = {}
    if origin:
        attributes["xray.origin"] = origin
    if namespace:
        attributes["xray.namespace"] = namespace
    end = seg.get("end_time")
    in_progress = bool(seg.get("in_progress", False)) or end is None
    if end is None:
        end = start
    _require(
        isinstance(end, (int, float)) and not isinstance(end, bool),
        f"segment {span_id!r}: end_time must be numeric epoch seconds",
    )
    if in_progress:
        attributes[META_IN_PROGRESS] = "true"
    kind = _map_kind(rules, origin, namespace, name)
    if kind is None:
        if origin or namespace:
            attributes[META_RAW_KIND] = origin or namespace
        kind = SpanKind.GENERIC
    explicit_parent = seg.get("parent_id")
    if explicit_parent is not None:
        _require(
            isinstance(explicit_parent, str) and explicit_parent != "",
            f"segment {span_id!r}: parent_id must be a non-empty string",
        )
        parent_id = explicit_parent
    error = bool(seg.get("error", False)) or bool(seg.get("fault", False))
    out.append(
        TraceSpan(
            id=span_id,
            parent_id=parent_id,
            name=name,
            kind=kind,
            start_us=_seconds_to_us(float(start)),
            end_us=_seconds_to_us(float(end)),
            error=error,
            attributes=attributes,
        )
    )
    subsegments = seg.get("subsegments", [])
    _require(
        isinstance(subsegments, list),
        f"segment {span_id!r}: subsegments must be a list",
    )
    for sub in subsegments:
        _require(isinstance(sub, dict), f"segment {span_id!r}: subsegment must be an object")
        _walk_xray_segment(sub, span_id, rules, out)


def import_xray(
    doc: bytes | str,
    kind_rules: Sequence[tuple[str, str, SpanKind]] | None = None,
) -> ExecutionTrace:
    """Import a batch of X-Ray-style segment documents as one trace.

    Accepts either ``{"trace_id": ..., "segments": [...]}`` (AWS-style
    ``Id``/``Segments`` casing too) or a bare segment list whose entries
    carry ``trace_id``.  Segments may be wrapped as ``{"Document": "..."}``
    with an embedded JSON string.  Fractional epoch-second timestamps are
    converted to integer microseconds (round half away from zero), nested
    subsegments become child spans, and a segment with no ``end_time`` is
    retained with a sentinel so ``validate`` reports the trace incomplete.
    """
    rules = tuple(kind_rules) if kind_rules is not None else DEFAULT_KIND_RULES
    try:
        parsed = json.loads(doc)
    except json.JSONDecodeError as exc:
        raise TraceParseError(f"malformed segment document: {exc}") from exc
    if isinstance(parsed, dict):
        trace_id = parsed.get("trace_id", parsed.get("Id"))
        raw_segments = parsed.get("segments", parsed.get("Segments"))
    else:
        _require(isinstance(parsed, list), "segment document must be an object or list")
        raw_segments = parsed
        trace_id = None
    _require(
        isinstance(raw_segments, list) and len(raw_segments) > 0,
        "segment document contains no segments",
    )
    segments: list[dict] = []
    for entry in raw_segments:
        _require(isinstance(entry, dict), "segments must be objects")
        if "Document" in entry:
            inner = entry["Document"]
            if isinstance(inner, str):
                try:
                    inner = json.loads(inner)
                except json.JSONDecodeError as exc:
                    raise TraceParseError(f"malformed embedded document: {exc}") from exc
            _require(isinstance(inner, dict), "embedded Document must be an object")
            entry = inner
        segments.append(entry)
    if trace_id is None:
        trace_id = segments[0].get("trace_id")
    _require(
        isinstance(trace_id, str) and trace_id != "",
        "segment document does not name a trace id",
    )
    spans: list[TraceSpan] = []
    for seg in segments:
        _walk_xray_segment(seg, None, rules, spans)
    return ExecutionTrace(str(trace_id), spans)


# --- Validation and cold classification -------------------------------------


def validate(trace: ExecutionTrace, margin_us: int = 1000) -> ValidationReport:
    """Check temporal sanity of a structurally well-formed trace.

    Tree-shape violations never reach this function (the constructor
    rejects them); findings here are per-span temporal anomalies plus
    import sentinels.  The verdict is ``valid`` iff both finding lists are
    empty; an in-progress sentinel makes it ``incomplete`` instead of
    ``invalid``.
    """
    structural: list[Finding] = []
    temporal: list[Finding] = []
    warnings: list[Finding] = []
    for span in trace.spans:
        if span.attributes.get(META_IN_PROGRESS) == "true":
            structural.append(
                Finding(
                    code="in_progress_span",
                    span_id=span.id,
                    message=f"span {span.id!r} was imported without an end time",
                )
            )
        if span.attributes.get(META_RAW_KIND) is not None:
            warnings.append(
                Finding(
                    code="unknown_kind",
                    span_id=span.id,
                    message=(
                        f"span {span.id!r}: unmapped kind "
                        f"{span.attributes[META_RAW_KIND]!r} treated as generic"
                    ),
                )
            )
        if span.end_us < span.start_us:
            temporal.append(
                Finding(
                    code="negative_duration",
                    span_id=span.id,
                    message=f"span {span.id!r} ends before it starts",
                )
            )
        if span.parent_id is not None:
            parent = trace.span(span.parent_id)
            if span.start_us < parent.start_us - margin_us:
                sync_looking = span.end_us <= parent.end_us + margin_us
                code = (
                    "sync_child_precedes_parent"
                    if sync_looking
                    else "child_precedes_parent"
                )
                temporal.append(
                    Finding(
                        code=code,
                        span_id=span.id,
                        message=(
                            f"span {span.id!r} starts before its parent "
                            f"{parent.id!r} beyond the {margin_us}us margin"
                        ),
                    )
                )
    if any(f.code == "in_progress_span" for f in structural):
        verdict = Verdict.INCOMPLETE
    elif structural or temporal:
        verdict = Verdict.INVALID
    else:
        verdict = Verdict.VALID
    return ValidationReport(
        verdict=verdict,
        structural_errors=tuple(structural),
        temporal_anomalies=tuple(temporal),
        has_exception=any(s.error for s in trace.spans),
        warnings=tuple(warnings),
    )


_INIT_KINDS = frozenset({SpanKind.RUNTIME_INIT, SpanKind.CONTAINER_INIT})


def cold_status(trace: ExecutionTrace, path: Iterable[str]) -> ColdStatus:
    """Classify a trace from the function spans on its critical path.

    A function span is cold iff any descendant is an initialization span.
    All cold functions -> cold, none -> warm, otherwise partial.  A path
    without function spans is vacuously warm.
    """
    statuses: list[bool] = []
    for span_id in path:
        span = trace.span(span_id)
        if span.kind is not SpanKind.FUNCTION:
            continue
        cold = any(d.kind in _INIT_KINDS for d in trace.descendants_of(span_id))
        statuses.append(cold)
    if not statuses:
        logger.warning(
            "trace %s: no function spans on the critical path; "
            "cold status is vacuously warm",
            trace.trace_id,
        )
        return ColdStatus.WARM
    if all(statuses):
        return ColdStatus.COLD
    if not any(statuses):
        return ColdStatus.WARM
    return ColdStatus.PARTIAL
