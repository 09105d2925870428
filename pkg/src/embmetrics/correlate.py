"""Joins measure records with downstream scores and reports Pearson correlations.

The join is on ``model_id``: measure records are filtered to one
``(checkpoint_step, layer)``, downstream rows to one task label, and each
measure present in every matched record is correlated against the scores.
Cross-step prediction (measures early in training against final scores)
falls out of the labeling: score rows carry whatever task label the final
run was recorded under, and the measures' checkpoint_step is independent
of it.

Models present on only one side of the join are reported in
``dropped_models``, never silently ignored. Coefficients are only computed
for three or more matched models; a correlation from two points is always
+/-1 and means nothing.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import FormatError, InsufficientDataError, MathError

MEASURE_NAMES = ("wcss", "db_index", "rankme_t", "ger")
MIN_MODELS = 3


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient, two-pass in float64.

    Requires equal lengths >= 3 and nonzero variance on both sides; raises
    MathError("constant series") otherwise. The result is clamped into
    [-1, 1] to absorb last-ulp roundoff.
    """
    xs = [float(v) for v in x]
    ys = [float(v) for v in y]
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < MIN_MODELS:
        raise InsufficientDataError(f"need at least {MIN_MODELS} points, got {len(xs)}")
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(xs, ys))
    sxx = math.fsum((a - mx) ** 2 for a in xs)
    syy = math.fsum((b - my) ** 2 for b in ys)
    if sxx == 0.0 or syy == 0.0:
        raise MathError("constant series")
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class MeasureRecord:
    """Measures computed for one (model, checkpoint step, layer)."""

    model_id: str
    checkpoint_step: int
    layer: int
    measures: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name, value in self.measures.items():
            if not math.isfinite(value):
                raise ValueError(f"measure {name!r} of {self.model_id} is not finite")


@dataclass(frozen=True)
class ScoreRow:
    model_id: str
    task: str
    score: float
    score_kind: str = "other"


@dataclass(frozen=True)
class DownstreamTable:
    """Downstream scores keyed by (model_id, task)."""

    rows: tuple[ScoreRow, ...]

    def __post_init__(self):
        seen = set()
        for row in self.rows:
            key = (row.model_id, row.task)
            if key in seen:
                raise ValueError(f"duplicate (model_id, task) row {key}")
            if not math.isfinite(row.score):
                raise ValueError(f"score for {key} is not finite")
            seen.add(key)


@dataclass(frozen=True)
class CorrelationReport:
    task: str
    checkpoint_step: int
    layer: int
    per_measure: dict[str, tuple[float, int]]  # measure -> (pearson_r, n)
    dropped_models: tuple[str, ...]


def correlate(
    measures: Iterable[MeasureRecord],
    downstream: DownstreamTable,
    task: str,
    checkpoint_step: int,
    layer: int,
    *,
    score_task: str | None = None,
) -> CorrelationReport:
    """Correlate each measure at one (checkpoint_step, layer) with task scores.

    ``score_task`` selects the downstream rows to join against and defaults
    to ``task``; pass a different label to correlate early-checkpoint
    measures against scores recorded under a final-performance label.
    """
    join_task = task if score_task is None else score_task
    records = {
        r.model_id: r
        for r in measures
        if r.checkpoint_step == checkpoint_step and r.layer == layer
    }
    scores = {row.model_id: row.score for row in downstream.rows if row.task == join_task}

    matched = sorted(set(records) & set(scores))
    dropped = tuple(sorted((set(records) | set(scores)) - set(matched)))
    if len(matched) < MIN_MODELS:
        raise InsufficientDataError(
            f"insufficient matched models: {len(matched)} < {MIN_MODELS} "
            f"(task={join_task!r}, step={checkpoint_step}, layer={layer})"
        )

    everywhere = set.intersection(*(set(records[m].measures) for m in matched))
    somewhere = set.union(*(set(records[m].measures) for m in matched))
    partial = sorted(somewhere - everywhere)
    if partial:
        warnings.warn(f"measures present in only some records excluded: {partial}", stacklevel=2)

    per_measure: dict[str, tuple[float, int]] = {}
    ys = [scores[m] for m in matched]
    for name in sorted(everywhere):
        xs = [records[m].measures[name] for m in matched]
        try:
            r = pearson(xs, ys)
        except MathError:
            warnings.warn(f"measure {name!r} is constant over matched models; excluded", stacklevel=2)
            continue
        per_measure[name] = (r, len(matched))
    if not per_measure and everywhere:
        raise MathError("constant series: no measure could be correlated")
    return CorrelationReport(
        task=task,
        checkpoint_step=checkpoint_step,
        layer=layer,
        per_measure=per_measure,
        dropped_models=dropped,
    )


# ---------------------------------------------------------------------------
# CSV / JSON interchange

def format_float(x: float) -> str:
    """Lossless decimal rendering used in all CSV output."""
    return f"{x:.17g}"


def write_measures_csv(records: Iterable[MeasureRecord], path: str | Path) -> None:
    """Measures CSV: one row per (record, measure), sorted for determinism."""
    rows = []
    for rec in records:
        for name, value in rec.measures.items():
            rows.append((rec.model_id, rec.checkpoint_step, rec.layer, name, value))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model_id", "checkpoint_step", "layer", "measure", "value"])
        for model_id, step, layer, name, value in rows:
            writer.writerow([model_id, step, layer, name, format_float(value)])


def read_measures_csv(path: str | Path) -> list[MeasureRecord]:
    grouped: dict[tuple[str, int, int], dict[str, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"model_id", "checkpoint_step", "layer", "measure", "value"}
        if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
            raise FormatError(f"{path}: measures CSV must have columns {sorted(expected)}")
        for row in reader:
            key = (row["model_id"], int(row["checkpoint_step"]), int(row["layer"]))
            grouped.setdefault(key, {})[row["measure"]] = float(row["value"])
    return [
        MeasureRecord(model_id=k[0], checkpoint_step=k[1], layer=k[2], measures=v)
        for k, v in sorted(grouped.items())
    ]


def write_downstream_csv(table: DownstreamTable, path: str | Path) -> None:
    rows = sorted(table.rows, key=lambda r: (r.model_id, r.task))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model_id", "task", "score", "score_kind"])
        for row in rows:
            writer.writerow([row.model_id, row.task, format_float(row.score), row.score_kind])


def read_downstream_csv(path: str | Path) -> DownstreamTable:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"model_id", "task", "score", "score_kind"}
        if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
            raise FormatError(f"{path}: downstream CSV must have columns {sorted(expected)}")
        for row in reader:
            rows.append(
                ScoreRow(
                    model_id=row["model_id"],
                    task=row["task"],
                    score=float(row["score"]),
                    score_kind=row["score_kind"],
                )
            )
    return DownstreamTable(rows=tuple(rows))


def write_report_csv(report: CorrelationReport, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["task", "checkpoint_step", "layer", "measure", "pearson_r", "n"])
        for name in sorted(report.per_measure):
            r, n = report.per_measure[name]
            writer.writerow([report.task, report.checkpoint_step, report.layer, name, format_float(r), n])


def report_to_dict(report: CorrelationReport) -> dict:
    return {
        "task": report.task,
        "checkpoint_step": report.checkpoint_step,
        "layer": report.layer,
        "per_measure": {
            name: {"pearson_r": r, "n": n} for name, (r, n) in sorted(report.per_measure.items())
        },
        "dropped_models": list(report.dropped_models),
    }


def write_report_json(report: CorrelationReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n")
