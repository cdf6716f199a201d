"""Command-line interface tests: subcommands, exit codes, output formats."""
import json
import math

import numpy as np
import pytest

from faastrace import record_of
from faastrace.cli import (
    EXIT_EMPTY,
    EXIT_INPUT,
    EXIT_OK,
    main,
    read_records,
)
from faastrace.synth import TraceSpec, generate
from faastrace.trace_model import ColdStatus, SpanKind, serialize

from helpers import mk_span, mk_trace


def write_corpus(path, count, seed=0, cold_probability=0.0, spacing_s=0.0):
    lines = []
    traces = []
    for i in range(count):
        spec = TraceSpec(seed=seed + i, cold_probability=cold_probability)
        trace, _ = generate(
            spec, trace_id=f"t-{seed + i:04d}", start_us=round(i * spacing_s * 1e6)
        )
        traces.append(trace)
        lines.append(serialize(trace).decode("utf-8"))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return traces


class TestAnalyze:
    def test_three_valid_traces_three_records(self, tmp_path):
        inp = tmp_path / "traces.jsonl"
        write_corpus(inp, 3)
        out = tmp_path / "records.csv"
        assert main(["analyze", str(inp), "--records-out", str(out)]) == EXIT_OK
        rows = out.read_text(encoding="utf-8").strip().split("\n")
        assert len(rows) == 1 + 3
        assert rows[0].startswith("trace_id,e2e_us,cold,valid,has_exception,wall_time,")

    def test_records_match_library_analysis(self, tmp_path):
        inp = tmp_path / "traces.jsonl"
        traces = write_corpus(inp, 5, seed=11, cold_probability=0.5)
        out = tmp_path / "records.csv"
        assert main(["analyze", str(inp), "--records-out", str(out)]) == EXIT_OK
        got = read_records(str(out))
        assert len(got) == 5
        for record, trace in zip(got, traces):
            expect = record_of(trace)
            assert record.trace_id == expect.trace_id
            assert record.aggregated == expect.aggregated
            assert record.e2e_us == expect.e2e_us
            assert record.cold is expect.cold
            assert record.valid == expect.valid
            assert record.has_exception == expect.has_exception
            assert record.wall_time == pytest.approx(expect.wall_time, abs=1e-6)

    def test_invalid_trace_is_counted_not_fatal(self, tmp_path, capsys):
        inp = tmp_path / "traces.jsonl"
        write_corpus(inp, 2)
        with open(inp, "a", encoding="utf-8") as fh:
            fh.write('{"trace_id": "broken", "spans": []}\n')
        out = tmp_path / "records.csv"
        assert main(["analyze", str(inp), "--records-out", str(out)]) == EXIT_OK
        captured = capsys.readouterr()
        assert "invalid=1" in captured.out
        assert "records=2" in captured.out
        assert len(out.read_text(encoding="utf-8").strip().split("\n")) == 1 + 2

    def test_missing_file_exits_2(self, tmp_path, capsys):
        assert main(["analyze", str(tmp_path / "nope.jsonl")]) == EXIT_INPUT
        assert "error:" in capsys.readouterr().err

    def test_empty_input_exits_2(self, tmp_path):
        inp = tmp_path / "empty.jsonl"
        inp.write_text("", encoding="utf-8")
        out = tmp_path / "records.csv"
        assert main(["analyze", str(inp), "--records-out", str(out)]) == EXIT_INPUT

    def test_segments_are_contiguous_and_sum_to_e2e(self, tmp_path):
        inp = tmp_path / "traces.jsonl"
        write_corpus(inp, 4, seed=3)
        rec_out = tmp_path / "records.csv"
        seg_out = tmp_path / "segments.csv"
        assert (
            main(
                [
                    "analyze",
                    str(inp),
                    "--records-out",
                    str(rec_out),
                    "--segments-out",
                    str(seg_out),
                ]
            )
            == EXIT_OK
        )
        records = {r.trace_id: r for r in read_records(str(rec_out))}
        per_trace: dict[str, list[tuple[int, int, int]]] = {}
        rows = seg_out.read_text(encoding="utf-8").strip().split("\n")
        assert rows[0] == "trace_id,index,start_us,end_us,duration_us,category,owner,case"
        for row in rows[1:]:
            cells = row.split(",")
            per_trace.setdefault(cells[0], []).append(
                (int(cells[2]), int(cells[3]), int(cells[4]))
            )
        assert set(per_trace) == set(records)
        for trace_id, segs in per_trace.items():
            for (s, e, d) in segs:
                assert e - s == d
            for (_, prev_end, _), (nxt_start, _, _) in zip(segs, segs[1:]):
                assert nxt_start == prev_end
            assert sum(d for _, _, d in segs) == records[trace_id].e2e_us

    def test_xray_format(self, tmp_path):
        doc = {
            "trace_id": "1-xr",
            "segments": [
                {
                    "id": "gw",
                    "name": "api",
                    "origin": "AWS::ApiGateway::Stage",
                    "start_time": 1.0,
                    "end_time": 1.25,
                },
                {
                    "id": "fn",
                    "parent_id": "gw",
                    "name": "handler",
                    "origin": "AWS::Lambda::Function",
                    "start_time": 1.05,
                    "end_time": 1.2,
                },
            ],
        }
        inp = tmp_path / "xray.jsonl"
        inp.write_text(json.dumps(doc) + "\n", encoding="utf-8")
        out = tmp_path / "records.csv"
        assert main(["analyze", str(inp), "--format", "xray", "--records-out", str(out)]) == EXIT_OK
        records = read_records(str(out))
        assert records[0].trace_id == "1-xr"
        assert records[0].e2e_us == 250_000

    def test_analyze_is_deterministic(self, tmp_path):
        inp = tmp_path / "traces.jsonl"
        write_corpus(inp, 6, seed=42, cold_probability=0.3)
        outs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            assert main(["analyze", str(inp), "--records-out", str(out)]) == EXIT_OK
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestReport:
    def records_fixture(self, tmp_path, cold_probability=0.5, count=30):
        inp = tmp_path / "traces.jsonl"
        write_corpus(inp, count, seed=100, cold_probability=cold_probability, spacing_s=1.0)
        out = tmp_path / "records.csv"
        assert main(["analyze", str(inp), "--records-out", str(out)]) == EXIT_OK
        return out

    def test_report_sections(self, tmp_path):
        records = self.records_fixture(tmp_path)
        out = tmp_path / "report.csv"
        assert (
            main(["report", str(records), "--warmup-s", "0", "--out", str(out)])
            == EXIT_OK
        )
        rows = out.read_text(encoding="utf-8").strip().split("\n")
        assert rows[0] == "section,percentile,category,value_us,fraction,count,filter"
        sections = {row.split(",")[0] for row in rows[1:]}
        assert sections == {"warm", "cold_penalty", "tail_penalty"}
        # 9 categories per section; warm appears once per requested percentile
        assert len(rows) == 1 + 9 * 3

    def test_percentile_flag_repeats_warm_section(self, tmp_path):
        records = self.records_fixture(tmp_path)
        out = tmp_path / "report.csv"
        assert (
            main(
                [
                    "report",
                    str(records),
                    "--warmup-s",
                    "0",
                    "--percentile",
                    "0.5",
                    "--percentile",
                    "0.9",
                    "--out",
                    str(out),
                ]
            )
            == EXIT_OK
        )
        rows = out.read_text(encoding="utf-8").strip().split("\n")
        warm_ps = {row.split(",")[1] for row in rows[1:] if row.startswith("warm,")}
        assert warm_ps == {"0.5", "0.9"}

    def test_empty_filter_exits_3_naming_filter(self, tmp_path, capsys):
        records = self.records_fixture(tmp_path, cold_probability=0.0)
        assert (
            main(["report", str(records), "--warmup-s", "0", "--out", str(tmp_path / "r.csv")])
            == EXIT_EMPTY
        )
        err = capsys.readouterr().err
        assert "no records left after filter" in err
        assert "cold" in err

    def test_warmup_discard_can_empty_everything(self, tmp_path, capsys):
        records = self.records_fixture(tmp_path, count=5)
        # all records fall inside a one-hour warmup window
        assert (
            main(["report", str(records), "--warmup-s", "3600", "--out", str(tmp_path / "r.csv")])
            == EXIT_EMPTY
        )
        assert "no records left after filter" in capsys.readouterr().err

    def test_bad_percentile_exits_2(self, tmp_path, capsys):
        records = self.records_fixture(tmp_path)
        assert (
            main(["report", str(records), "--percentile", "1.5"])
            == EXIT_INPUT
        )
        assert "percentile" in capsys.readouterr().err


class TestSchedules:
    def test_pattern_constant_200_by_1200(self, tmp_path):
        out = tmp_path / "schedule.csv"
        assert (
            main(
                [
                    "pattern",
                    "constant",
                    "--rate",
                    "200",
                    "--duration",
                    "1200",
                    "--out",
                    str(out),
                ]
            )
            == EXIT_OK
        )
        rows = out.read_text(encoding="utf-8").strip().split("\n")
        assert len(rows) == 1200
        assert all(row == f"{i},200" for i, row in enumerate(rows))

    def test_pattern_on_off_cycle(self, tmp_path):
        out = tmp_path / "schedule.csv"
        assert (
            main(["pattern", "on_off", "--rate", "20", "--duration", "8", "--out", str(out)])
            == EXIT_OK
        )
        rates = [int(r.split(",")[1]) for r in out.read_text(encoding="utf-8").strip().split("\n")]
        assert rates == [80, 0, 0, 0, 80, 0, 0, 0]

    def test_pattern_zero_rate_exits_2(self, tmp_path, capsys):
        assert main(["pattern", "constant", "--rate", "0.3", "--duration", "60"]) == EXIT_INPUT
        assert "error:" in capsys.readouterr().err

    def test_upscale_check_and_conservation(self, tmp_path, capsys):
        minutes = tmp_path / "minutes.txt"
        counts = [120, 0, 55, 700, 61]
        minutes.write_text("\n".join(str(c) for c in counts) + "\n", encoding="utf-8")
        out = tmp_path / "schedule.csv"
        assert (
            main(["upscale", str(minutes), "--check", "--seed", "9", "--out", str(out)])
            == EXIT_OK
        )
        assert "conservation OK" in capsys.readouterr().err
        rates = [int(r.split(",")[1]) for r in out.read_text(encoding="utf-8").strip().split("\n")]
        assert len(rates) == 60 * len(counts)
        sums = np.asarray(rates).reshape(len(counts), 60).sum(axis=1)
        assert sums.tolist() == counts

    def test_upscale_csv_column(self, tmp_path):
        minutes = tmp_path / "minutes.csv"
        minutes.write_text(
            "minute,count\n0,60\n1,120\n", encoding="utf-8"
        )
        out = tmp_path / "schedule.csv"
        assert (
            main(
                [
                    "upscale",
                    str(minutes),
                    "--column",
                    "1",
                    "--skip-header",
                    "--out",
                    str(out),
                ]
            )
            == EXIT_OK
        )
        rates = [int(r.split(",")[1]) for r in out.read_text(encoding="utf-8").strip().split("\n")]
        assert sum(rates[:60]) == 60
        assert sum(rates[60:]) == 120

    def test_upscale_non_integer_counts_exit_2(self, tmp_path, capsys):
        minutes = tmp_path / "minutes.txt"
        minutes.write_text("12.5\n", encoding="utf-8")
        assert main(["upscale", str(minutes)]) == EXIT_INPUT
        assert "integer" in capsys.readouterr().err


class TestValidateLoad:
    def schedules(self, tmp_path):
        planned = tmp_path / "planned.csv"
        rng = np.random.default_rng(5)
        rates = rng.integers(50, 150, size=600)
        planned.write_text(
            "\n".join(f"{i},{r}" for i, r in enumerate(rates)) + "\n", encoding="utf-8"
        )
        scaled = tmp_path / "scaled.csv"
        scaled.write_text(
            "\n".join(f"{i},{0.8 * r}" for i, r in enumerate(rates)) + "\n",
            encoding="utf-8",
        )
        return planned, scaled

    def test_identical_passes_and_scaled_fails(self, tmp_path):
        planned, scaled = self.schedules(tmp_path)
        out = tmp_path / "verdicts.csv"
        assert (
            main(
                [
                    "validate-load",
                    "--planned",
                    str(planned),
                    "--sent",
                    str(planned),
                    "--executed",
                    str(scaled),
                    "--out",
                    str(out),
                ]
            )
            == EXIT_OK
        )
        rows = out.read_text(encoding="utf-8").strip().split("\n")
        assert rows[0].startswith("comparison,dtw_distance,")
        first = rows[1].split(",")
        second = rows[2].split(",")
        assert first[0] == "planned_vs_sent"
        assert float(first[1]) == 0.0
        assert first[4] == "true"
        assert second[0] == "sent_vs_executed"
        assert math.isclose(float(second[3]), 0.2, rel_tol=1e-9)
        assert second[4] == "false"

    def test_bare_rate_lines_accepted(self, tmp_path):
        sched = tmp_path / "bare.txt"
        sched.write_text("5\n5\n5\n", encoding="utf-8")
        out = tmp_path / "verdicts.csv"
        assert (
            main(
                [
                    "validate-load",
                    "--planned",
                    str(sched),
                    "--sent",
                    str(sched),
                    "--executed",
                    str(sched),
                    "--out",
                    str(out),
                ]
            )
            == EXIT_OK
        )
        rows = out.read_text(encoding="utf-8").strip().split("\n")
        assert rows[1].split(",")[4] == "true"

    def test_unreadable_schedule_exits_2(self, tmp_path, capsys):
        sched = tmp_path / "bad.txt"
        sched.write_text("not-a-number\n", encoding="utf-8")
        assert (
            main(
                [
                    "validate-load",
                    "--planned",
                    str(sched),
                    "--sent",
                    str(sched),
                    "--executed",
                    str(sched),
                ]
            )
            == EXIT_INPUT
        )
        assert "not a rate" in capsys.readouterr().err


class TestSynth:
    def test_seed_7_twice_is_byte_identical(self, tmp_path):
        blobs = []
        for name in ("one.jsonl", "two.jsonl"):
            out = tmp_path / name
            assert (
                main(["synth", "--count", "4", "--seed", "7", "--out", str(out)])
                == EXIT_OK
            )
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]

    def test_spacing_staggers_roots(self, tmp_path):
        out = tmp_path / "traces.jsonl"
        assert (
            main(
                [
                    "synth",
                    "--count",
                    "3",
                    "--seed",
                    "0",
                    "--spacing-s",
                    "1.5",
                    "--out",
                    str(out),
                ]
            )
            == EXIT_OK
        )
        docs = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
        roots = [
            min(d["spans"], key=lambda s: s["start_us"])["start_us"] for d in docs
        ]
        assert roots == [0, 1_500_000, 3_000_000]

    def test_truth_out_documents_align(self, tmp_path):
        out = tmp_path / "traces.jsonl"
        truth = tmp_path / "truth.jsonl"
        assert (
            main(
                [
                    "synth",
                    "--count",
                    "3",
                    "--seed",
                    "2",
                    "--out",
                    str(out),
                    "--truth-out",
                    str(truth),
                ]
            )
            == EXIT_OK
        )
        docs = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
        truths = [json.loads(line) for line in truth.read_text(encoding="utf-8").splitlines()]
        assert len(docs) == len(truths) == 3
        for doc, tr in zip(docs, truths):
            assert doc["trace_id"] == tr["trace_id"]
            span_ids = {s["id"] for s in doc["spans"]}
            assert set(tr["path"]) <= span_ids
            assert tr["cold"] in {"cold", "warm", "partial"}
            total = sum(s["end_us"] - s["start_us"] for s in tr["segments"])
            root = min(doc["spans"], key=lambda s: s["start_us"])
            assert total == root["end_us"] - root["start_us"]

    def test_synth_output_feeds_analyze(self, tmp_path):
        out = tmp_path / "traces.jsonl"
        assert (
            main(
                [
                    "synth",
                    "--count",
                    "8",
                    "--seed",
                    "21",
                    "--cold-probability",
                    "1.0",
                    "--out",
                    str(out),
                ]
            )
            == EXIT_OK
        )
        records_out = tmp_path / "records.csv"
        assert main(["analyze", str(out), "--records-out", str(records_out)]) == EXIT_OK
        records = read_records(str(records_out))
        assert len(records) == 8
        assert all(r.valid for r in records)


class TestCategoryMapFlag:
    def test_override_changes_aggregation(self, tmp_path):
        trace = mk_trace(
            "t-map",
            mk_span("root", kind=SpanKind.FUNCTION, start_ms=0, end_ms=100),
            mk_span(
                "svc", parent="root", kind=SpanKind.EXTERNAL_SERVICE, start_ms=10, end_ms=40
            ),
        )
        inp = tmp_path / "traces.jsonl"
        inp.write_text(serialize(trace).decode("utf-8") + "\n", encoding="utf-8")
        override = tmp_path / "map.json"
        override.write_text(
            json.dumps({"external_service": "computation"}), encoding="utf-8"
        )
        plain_out = tmp_path / "plain.csv"
        mapped_out = tmp_path / "mapped.csv"
        assert main(["analyze", str(inp), "--records-out", str(plain_out)]) == EXIT_OK
        assert (
            main(
                [
                    "analyze",
                    str(inp),
                    "--category-map",
                    str(override),
                    "--records-out",
                    str(mapped_out),
                ]
            )
            == EXIT_OK
        )
        from faastrace.breakdown import Category

        plain = read_records(str(plain_out))[0]
        mapped = read_records(str(mapped_out))[0]
        assert plain.aggregated[Category.EXTERNAL_SERVICE] == 30_000
        assert mapped.aggregated[Category.EXTERNAL_SERVICE] == 0
        assert mapped.aggregated[Category.COMPUTATION] == plain.aggregated[
            Category.COMPUTATION
        ] + 30_000

    def test_unknown_category_exits_2(self, tmp_path, capsys):
        inp = tmp_path / "traces.jsonl"
        write_corpus(inp, 1)
        override = tmp_path / "map.json"
        override.write_text(json.dumps({"queue": "nonsense"}), encoding="utf-8")
        assert (
            main(["analyze", str(inp), "--category-map", str(override)])
            == EXIT_INPUT
        )
        assert "error:" in capsys.readouterr().err


class TestGoldenFixtures:
    def test_shipped_corpus_reproduces_golden_outputs(self, tmp_path, fixtures_dir):
        corpus = fixtures_dir / "corpus.jsonl"
        records_out = tmp_path / "records.csv"
        report_out = tmp_path / "report.csv"
        assert (
            main(["analyze", str(corpus), "--records-out", str(records_out)])
            == EXIT_OK
        )
        assert (
            main(
                [
                    "report",
                    str(records_out),
                    "--percentile",
                    "0.5",
                    "--percentile",
                    "0.99",
                    "--out",
                    str(report_out),
                ]
            )
            == EXIT_OK
        )
        assert records_out.read_bytes() == (fixtures_dir / "golden_records.csv").read_bytes()
        assert report_out.read_bytes() == (fixtures_dir / "golden_report.csv").read_bytes()

    def test_golden_corpus_has_all_cold_statuses(self, fixtures_dir):
        records = read_records(str(fixtures_dir / "golden_records.csv"))
        statuses = {r.cold for r in records}
        assert statuses == {ColdStatus.WARM, ColdStatus.COLD, ColdStatus.PARTIAL}
        assert len(records) == 500
