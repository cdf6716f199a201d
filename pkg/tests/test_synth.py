"""Corpus-level agreement between generated ground truth and analysis."""
import collections

import pytest

from faastrace import (
    CaseLabel,
    ColdStatus,
    TraceSpec,
    Verdict,
    aggregate,
    cold_status,
    extract,
    extract_breakdown,
    generate,
    inject_skew,
    validate,
)

CORPUS_SEEDS = range(300)


def corpus(**overrides):
    for seed in CORPUS_SEEDS:
        spec = TraceSpec(seed=seed, cold_probability=0.3, **overrides)
        yield generate(spec)


class TestGeneratedShape:
    def test_deterministic_for_seed(self):
        t1, g1 = generate(TraceSpec(seed=7))
        t2, g2 = generate(TraceSpec(seed=7))
        assert t1 == t2
        assert g1 == g2

    def test_seeds_differ(self):
        t1, _ = generate(TraceSpec(seed=1))
        t2, _ = generate(TraceSpec(seed=2))
        assert t1 != t2

    def test_span_budget(self):
        for trace, _ in corpus():
            assert 2 <= len(trace) <= 50

    def test_start_offset(self):
        trace, truth = generate(TraceSpec(seed=3), start_us=5_000_000)
        assert trace.root.start_us == 5_000_000
        assert truth.segments[0].start_us == 5_000_000

    def test_traces_are_valid(self):
        for trace, _ in corpus():
            report = validate(trace)
            assert report.verdict is Verdict.VALID, (trace.trace_id, report)


class TestPathAgreement:
    def test_extracted_path_matches_truth(self):
        for trace, truth in corpus():
            got = extract(trace)
            assert tuple(got) == truth.path, trace.trace_id

    def test_agreement_with_heavy_async(self):
        for seed in range(150):
            trace, truth = generate(TraceSpec(seed=seed, async_probability=0.7))
            assert tuple(extract(trace)) == truth.path, seed

    def test_agreement_with_deep_trees(self):
        for seed in range(100):
            trace, truth = generate(
                TraceSpec(seed=seed, max_depth=10, max_children=2)
            )
            assert tuple(extract(trace)) == truth.path, seed


class TestBreakdownAgreement:
    def test_segments_match_truth(self):
        for trace, truth in corpus():
            got = extract_breakdown(trace, extract(trace))
            assert got.segments == truth.segments, trace.trace_id

    def test_conservation_over_corpus(self):
        for trace, _ in corpus():
            breakdown = extract_breakdown(trace, extract(trace))
            assert sum(s.duration_us for s in breakdown.segments) == breakdown.e2e_us
            assert sum(aggregate(breakdown).values()) == breakdown.e2e_us

    def test_case_coverage(self):
        counts = collections.Counter()
        for _, truth in corpus(async_probability=0.5):
            for segment in truth.segments:
                counts[segment.case] += 1
        for case in (
            CaseLabel.SYNC1,
            CaseLabel.SYNC2,
            CaseLabel.ASYNC1,
            CaseLabel.ASYNC2,
            CaseLabel.WITHIN,
            CaseLabel.TRAILING,
        ):
            assert counts[case] >= 50, (case, counts)


class TestColdAgreement:
    def test_cold_status_matches_truth(self):
        seen = set()
        for trace, truth in corpus():
            got = cold_status(trace, extract(trace))
            assert got is truth.cold, trace.trace_id
            seen.add(got)
        assert ColdStatus.COLD in seen
        assert ColdStatus.WARM in seen
        assert ColdStatus.PARTIAL in seen


class TestSkewRobustness:
    def test_paths_stable_under_400us_skew(self):
        agree = 0
        total = 0
        for trace, truth in corpus():
            skewed = inject_skew(trace, 400, seed=1000 + int(trace.trace_id[6:]))
            total += 1
            if tuple(extract(skewed)) == truth.path:
                agree += 1
        assert agree / total >= 0.99, f"{agree}/{total}"

    def test_skew_preserves_span_shape(self):
        trace, _ = generate(TraceSpec(seed=11))
        skewed = inject_skew(trace, 400, seed=5)
        assert len(skewed) == len(trace)
        for span in skewed.spans:
            original = trace.span(span.id)
            assert span.end_us >= span.start_us
            assert abs(span.start_us - original.start_us) <= 400
            assert span.end_us - original.end_us <= 400
            assert span.parent_id == original.parent_id

    def test_zero_skew_is_identity(self):
        trace, _ = generate(TraceSpec(seed=4))
        assert inject_skew(trace, 0, seed=9) == trace


class TestUndetectableAsync:
    def test_flag_off_never_marks(self):
        for _, truth in corpus():
            assert not truth.has_undetectable

    def test_flag_on_eventually_marks(self):
        marked = 0
        for seed in range(80):
            _, truth = generate(TraceSpec(seed=seed, undetectable_async=True))
            if truth.has_undetectable:
                marked += 1
        assert marked > 0

    def test_marked_traces_still_well_formed(self):
        for seed in range(80):
            trace, truth = generate(TraceSpec(seed=seed, undetectable_async=True))
            if not truth.has_undetectable:
                continue
            assert validate(trace).verdict is Verdict.VALID
            breakdown = extract_breakdown(trace, extract(trace))
            assert sum(s.duration_us for s in breakdown.segments) == breakdown.e2e_us
