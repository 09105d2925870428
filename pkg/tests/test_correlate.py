"""Pearson correlation, the measure/score join, and CSV interchange."""

import csv
import json
import math

import numpy as np
import pytest

from embmetrics import (
    DownstreamTable,
    InsufficientDataError,
    MathError,
    MeasureRecord,
    ScoreRow,
    correlate,
    pearson,
)
from embmetrics.correlate import (
    format_float,
    read_downstream_csv,
    read_measures_csv,
    report_to_dict,
    write_downstream_csv,
    write_measures_csv,
    write_report_csv,
    write_report_json,
)

from oracles import PEARSON_FIXTURES, pearson_fraction


def make_records(values: dict[str, list[float]], step=50_000, layer=12) -> list[MeasureRecord]:
    n = len(next(iter(values.values())))
    return [
        MeasureRecord(
            model_id=f"m{i:02d}",
            checkpoint_step=step,
            layer=layer,
            measures={name: series[i] for name, series in values.items()},
        )
        for i in range(n)
    ]


def make_table(scores: list[float], task="asr") -> DownstreamTable:
    return DownstreamTable(
        rows=tuple(
            ScoreRow(model_id=f"m{i:02d}", task=task, score=s, score_kind="wer") for i, s in enumerate(scores)
        )
    )


class TestPearson:
    @pytest.mark.parametrize("x,y,expected", PEARSON_FIXTURES)
    def test_frozen_fixtures(self, x, y, expected):
        assert pearson(x, y) == pytest.approx(expected, abs=1e-12)
        assert pearson(x, y) == pytest.approx(pearson_fraction(x, y), abs=1e-12)

    def test_perfect_correlation(self):
        x = [3.0, 1.0, 4.0, 1.5]
        assert pearson(x, x) == 1.0
        assert pearson(x, [-v for v in x]) == -1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            pearson([1, 2, 3], [1, 2])

    def test_too_few_points(self):
        with pytest.raises(InsufficientDataError):
            pearson([1, 2], [3, 4])

    def test_constant_series(self):
        with pytest.raises(MathError, match="constant series"):
            pearson([1, 1, 1], [1, 2, 3])
        with pytest.raises(MathError, match="constant series"):
            pearson([1, 2, 3], [5, 5, 5])

    def test_bounded_and_symmetric(self, gen):
        for _ in range(1000):
            n = int(gen.integers(3, 30))
            x = gen.standard_normal(n)
            y = gen.standard_normal(n)
            r = pearson(x, y)
            assert -1.0 <= r <= 1.0
            assert pearson(y, x) == pytest.approx(r, abs=1e-15)

    def test_affine_invariance(self, gen):
        for _ in range(200):
            n = int(gen.integers(3, 20))
            x = gen.standard_normal(n)
            y = gen.standard_normal(n)
            r = pearson(x, y)
            a = float(gen.uniform(0.1, 5.0)) * float(gen.choice([-1.0, 1.0]))
            b = float(gen.uniform(-10, 10))
            assert pearson([a * v + b for v in x], y) == pytest.approx(math.copysign(1.0, a) * r, abs=1e-12)


class TestCorrelate:
    def test_identical_series_gives_one(self):
        scores = [3.0, 1.0, 4.0, 1.5, 9.0]
        records = make_records({"ger": scores})
        report = correlate(records, make_table(scores), task="asr", checkpoint_step=50_000, layer=12)
        r, n = report.per_measure["ger"]
        assert r == 1.0 and n == 5
        assert report.dropped_models == ()

    def test_join_bookkeeping(self):
        records = make_records({"ger": [1.0, 2.0, 3.0, 4.0, 5.0]})
        table = make_table([9.0, 7.0, 5.0, 3.0])  # m04 has no score
        report = correlate(records, table, task="asr", checkpoint_step=50_000, layer=12)
        assert report.per_measure["ger"][1] == 4
        assert report.dropped_models == ("m04",)

    def test_insufficient_matches(self):
        records = make_records({"ger": [1.0, 2.0]})
        table = make_table([1.0, 2.0])
        with pytest.raises(InsufficientDataError, match="insufficient matched models"):
            correlate(records, table, task="asr", checkpoint_step=50_000, layer=12)

    def test_wrong_step_or_layer_filters_out(self):
        records = make_records({"ger": [1.0, 2.0, 3.0]})
        table = make_table([1.0, 2.0, 3.0])
        with pytest.raises(InsufficientDataError):
            correlate(records, table, task="asr", checkpoint_step=200_000, layer=12)

    def test_partial_measure_excluded_with_warning(self):
        records = make_records({"ger": [1.0, 2.0, 3.0, 4.0]})
        partial = records[0].measures.copy()
        partial["wcss"] = 5.0
        records[0] = MeasureRecord("m00", 50_000, 12, partial)
        table = make_table([4.0, 3.0, 2.0, 1.0])
        with pytest.warns(UserWarning, match="only some records"):
            report = correlate(records, table, task="asr", checkpoint_step=50_000, layer=12)
        assert "wcss" not in report.per_measure
        assert "ger" in report.per_measure

    def test_constant_measure_excluded_with_warning(self):
        records = make_records({"ger": [2.0, 2.0, 2.0], "wcss": [1.0, 2.0, 4.0]})
        table = make_table([3.0, 2.0, 1.0])
        with pytest.warns(UserWarning, match="constant"):
            report = correlate(records, table, task="asr", checkpoint_step=50_000, layer=12)
        assert "ger" not in report.per_measure and "wcss" in report.per_measure

    def test_cross_step_join(self):
        records = make_records({"ger": [1.0, 2.0, 3.0, 4.0]}, step=50_000)
        final = make_table([9.0, 8.0, 6.0, 2.0], task="asr-final")
        report = correlate(
            records, final, task="asr", checkpoint_step=50_000, layer=12, score_task="asr-final"
        )
        assert report.task == "asr"
        assert report.per_measure["ger"][0] == pytest.approx(pearson([1, 2, 3, 4], [9, 8, 6, 2]), abs=1e-15)

    def test_row_order_invariance(self):
        values = {"ger": [1.0, 5.0, 2.0, 4.0]}
        records = make_records(values)
        table = make_table([4.0, 1.0, 3.0, 2.0])
        forward = correlate(records, table, task="asr", checkpoint_step=50_000, layer=12)
        backward = correlate(list(reversed(records)), table, task="asr", checkpoint_step=50_000, layer=12)
        assert forward.per_measure == backward.per_measure

    def test_planted_cohort_relation(self, gen):
        g = [float(v) for v in gen.uniform(4, 48, size=12)]
        eps = [float(v) for v in gen.uniform(-0.5, 0.5, size=12)]
        scores = [100.0 - gi + ei for gi, ei in zip(g, eps)]
        records = make_records({"ger": g})
        report = correlate(records, make_table(scores), task="asr", checkpoint_step=50_000, layer=12)
        assert report.per_measure["ger"][0] <= -0.95


class TestValidation:
    def test_non_finite_measure_rejected(self):
        with pytest.raises(ValueError, match="not finite"):
            MeasureRecord("m", 0, 0, {"ger": float("nan")})

    def test_duplicate_downstream_row_rejected(self):
        row = ScoreRow("m", "asr", 1.0, "wer")
        with pytest.raises(ValueError, match="duplicate"):
            DownstreamTable(rows=(row, row))


class TestInterchange:
    def test_measures_csv_round_trip(self, tmp_path):
        records = make_records({"ger": [1.25, 2.5, 3.75], "wcss": [0.1, 0.2, 0.31415926535897931]})
        path = tmp_path / "measures.csv"
        write_measures_csv(records, path)
        back = read_measures_csv(path)
        assert back == sorted(records, key=lambda r: r.model_id)

    def test_downstream_csv_round_trip(self, tmp_path):
        table = make_table([1.5, 2.25, 1.0 / 3.0])
        path = tmp_path / "scores.csv"
        write_downstream_csv(table, path)
        back = read_downstream_csv(path)
        key = lambda r: r.model_id
        assert sorted(back.rows, key=key) == sorted(table.rows, key=key)

    def test_report_csv_json_mirror(self, tmp_path):
        records = make_records({"ger": [1.0, 2.0, 3.0, 4.0], "wcss": [4.0, 1.0, 3.0, 2.0]})
        table = make_table([5.0, 4.5, 2.0, 1.0])
        report = correlate(records, table, task="asr", checkpoint_step=50_000, layer=12)
        write_report_csv(report, tmp_path / "report.csv")
        write_report_json(report, tmp_path / "report.json")

        mirror = json.loads((tmp_path / "report.json").read_text())
        with open(tmp_path / "report.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(mirror["per_measure"]) == 2
        for row in rows:
            entry = mirror["per_measure"][row["measure"]]
            assert float(row["pearson_r"]) == entry["pearson_r"]
            assert int(row["n"]) == entry["n"]
            assert row["task"] == mirror["task"] == "asr"

    def test_format_float_lossless(self, gen):
        for _ in range(200):
            v = float(gen.standard_normal()) * 10 ** int(gen.integers(-12, 13))
            assert float(format_float(v)) == v

    def test_report_dict_shape(self):
        records = make_records({"ger": [1.0, 2.0, 3.0]})
        report = correlate(records, make_table([3.0, 2.0, 1.0]), task="asr", checkpoint_step=50_000, layer=12)
        d = report_to_dict(report)
        assert set(d) == {"task", "checkpoint_step", "layer", "per_measure", "dropped_models"}
        assert d["per_measure"]["ger"]["n"] == 3

    def test_external_measure_names_pass_through(self, tmp_path):
        # an externally produced measures CSV may carry extra measures such
        # as a pre-training loss; they join and correlate like any other
        path = tmp_path / "measures.csv"
        lines = ["model_id,checkpoint_step,layer,measure,value"]
        losses = [2.5, 2.1, 1.4, 3.0]
        for i, loss in enumerate(losses):
            lines.append(f"m{i:02d},50000,12,pretrain_loss,{loss}")
            lines.append(f"m{i:02d},50000,12,ger,{10 + i}")
        path.write_text("\n".join(lines) + "\n")
        records = read_measures_csv(path)
        assert all(set(r.measures) == {"pretrain_loss", "ger"} for r in records)
        report = correlate(records, make_table([4.0, 3.0, 2.0, 1.0]), task="asr", checkpoint_step=50_000, layer=12)
        assert set(report.per_measure) == {"pretrain_loss", "ger"}

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        from embmetrics import FormatError

        with pytest.raises(FormatError, match="columns"):
            read_measures_csv(path)
        with pytest.raises(FormatError, match="columns"):
            read_downstream_csv(path)
