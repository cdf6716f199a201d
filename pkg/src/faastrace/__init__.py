"""Critical-path latency analysis for serverless traces.

Subpackages cover the trace model and validation, critical-path
extraction, latency breakdowns, corpus aggregation, workload upscaling
and pattern synthesis, load validation via dynamic time warping, and a
ground-truth trace generator for testing.
"""
from __future__ import annotations

from .aggregate import (
    BreakdownReport,
    EmptyFilterError,
    PenaltyReport,
    TraceRecord,
    cold_penalty,
    discard_warmup,
    percentile_nearest_rank,
    record_of,
    summarize,
    tail_penalty,
)
from .breakdown import (
    CaseLabel,
    Category,
    CategoryMap,
    LatencyBreakdown,
    Segment,
    aggregate,
    extract_breakdown,
)
from .critical_path import (
    AncestorStack,
    CriticalPath,
    TemporalConfig,
    build_stack,
    extract,
    happens_before,
    is_async,
)
from .loadcheck import (
    LoadVerdict,
    compare_load,
    dtw_exact,
    fastdtw,
    total_deviation,
    validate_load,
)
from .synth import GroundTruth, TraceSpec, generate, inject_skew
from .trace_model import (
    ColdStatus,
    ExecutionTrace,
    SpanKind,
    TraceParseError,
    TraceSpan,
    ValidationReport,
    Verdict,
    cold_status,
    import_xray,
    parse_canonical,
    serialize,
    validate,
)
from .workload import (
    MinuteSeries,
    PatternError,
    PatternSpec,
    SecondSeries,
    UpscaleConfig,
    estimate_hurst,
    generate_fgn,
    synth_pattern,
    upscale,
)

__version__ = "0.1.0"

__all__ = [
    "AncestorStack",
    "BreakdownReport",
    "CaseLabel",
    "Category",
    "CategoryMap",
    "ColdStatus",
    "CriticalPath",
    "EmptyFilterError",
    "ExecutionTrace",
    "GroundTruth",
    "LatencyBreakdown",
    "LoadVerdict",
    "MinuteSeries",
    "PatternError",
    "PatternSpec",
    "PenaltyReport",
    "SecondSeries",
    "Segment",
    "SpanKind",
    "TemporalConfig",
    "TraceParseError",
    "TraceRecord",
    "TraceSpan",
    "TraceSpec",
    "UpscaleConfig",
    "ValidationReport",
    "Verdict",
    "aggregate",
    "build_stack",
    "cold_penalty",
    "cold_status",
    "compare_load",
    "discard_warmup",
    "dtw_exact",
    "estimate_hurst",
    "extract",
    "fastdtw",
    "extract_breakdown",
    "generate",
    "generate_fgn",
    "happens_before",
    "import_xray",
    "inject_skew",
    "is_async",
    "parse_canonical",
    "percentile_nearest_rank",
    "record_of",
    "serialize",
    "summarize",
    "synth_pattern",
    "tail_penalty",
    "total_deviation",
    "upscale",
    "validate",
    "validate_load",
]
