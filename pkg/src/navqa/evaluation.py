"""Evaluation harness: recall against gold evidence and judged answer scores.

Two measurements live here. The deterministic one is recall@k: how much of
an item's gold evidence lands in the first k retrieved clips. The judged
one asks a model to grade a predicted answer on four 0-5 dimensions; per
distance bucket, each dimension's mean is reported on a 0-100 scale and
the overall figure averages the present bucket-by-dimension cells (not
items). Empty buckets are omitted rather than reported as zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import (
    EmptyGoldError,
    GatewayError,
    MalformedResponseError,
    NavqaError,
    SchemaError,
    ShapeMismatchError,
)
from .gateway import GatewayRequest, parse_json_object
from .prompts import JUDGE_DIMENSIONS, judge_prompt
from .qa import DistanceThresholds, QAItem, bucket_distance
from .retrieval import DEFAULT_TOP_K

SCORE_MAX = 5


@dataclass(frozen=True)
class JudgeScores:
    """One judged answer: four integer scores, each in [0, 5]."""

    comprehensiveness: int
    depth: int
    evidence: int
    reasoning: int

    def __post_init__(self):
        for name in JUDGE_DIMENSIONS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise SchemaError(f"{name} must be an integer")
            if not 0 <= value <= SCORE_MAX:
                raise SchemaError(f"{name} must be in [0, {SCORE_MAX}], got {value}")

    def as_dict(self) -> dict[str, int]:
        return {name: getattr(self, name) for name in JUDGE_DIMENSIONS}


def judge_answer(
    gateway, question: str, gold_answer: str, predicted_answer: str
) -> JudgeScores:
    """Grade one predicted answer against the reference via the gateway.

    Raises:
        MalformedResponseError: reply is not four in-range integers.
        GatewayError: the call itself failed.
    """
    for name, value in (
        ("question", question),
        ("gold_answer", gold_answer),
        ("predicted_answer", predicted_answer),
    ):
        if not value:
            raise SchemaError(f"{name} must be nonempty")
    prompt = judge_prompt(question, gold_answer, predicted_answer)
    response = gateway.send(GatewayRequest(task="judge", prompt=prompt))
    obj = parse_json_object(response.raw_text)
    values: dict[str, int] = {}
    for name in JUDGE_DIMENSIONS:
        value = obj.get(name)
        if isinstance(value, bool) or not isinstance(value, int):
            raise MalformedResponseError(f"dimension {name!r} must be an integer")
        if not 0 <= value <= SCORE_MAX:
            raise MalformedResponseError(
                f"dimension {name!r} must be in [0, {SCORE_MAX}], got {value}"
            )
        values[name] = value
    return JudgeScores(**values)


def recall_at_k(retrieved: Sequence[int], gold: Iterable[int], k: int) -> float:
    """Fraction of gold clips found in the first k retrieved clips."""
    if k < 1:
        raise NavqaError(f"k must be >= 1, got {k}")
    gold_set = set(gold)
    if not gold_set:
        raise EmptyGoldError("recall is undefined for an empty gold set")
    hits = gold_set & set(retrieved[:k])
    return len(hits) / len(gold_set)


# --- aggregation ----------------------------------------------------------------


@dataclass(frozen=True)
class JudgedItem:
    """One evaluated item: its judge scores and, optionally, its retrieval.

    ``gold`` overrides the item's evidence events as the recall target,
    for datasets whose scene indices were mapped to clip indices.
    """

    item: QAItem
    scores: JudgeScores
    retrieved: tuple[int, ...] | None = None
    gold: tuple[int, ...] | None = None


@dataclass(frozen=True)
class EvalReport:
    """Bucketed judge means (0-100), overall cell mean, and recall@k."""

    cells: dict[str, dict[str, float]]
    overall: float | None
    per_reasoning: dict[str, float]
    recall: dict[str, float]
    k: int
    counts: dict[str, int]

    def to_dict(self) -> dict[str, object]:
        doc: dict[str, object] = {
            "note": "overall averages the present bucket x dimension cells",
            "k": self.k,
            "counts": dict(sorted(self.counts.items())),
            "cells": {b: dict(m) for b, m in sorted(self.cells.items())},
            "per_reasoning": dict(sorted(self.per_reasoning.items())),
            "recall": dict(sorted(self.recall.items())),
        }
        if self.overall is not None:
            doc["overall"] = self.overall
        return doc


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def aggregate_report(
    judged: Sequence[JudgedItem],
    thresholds: DistanceThresholds | None = None,
    k: int = DEFAULT_TOP_K,
) -> EvalReport:
    """Fold judged items into the bucketed report.

    Items are bucketed by their stored distance label unless ``thresholds``
    is given, in which case labels are recomputed from evidence spans.
    Aggregation is order-independent.
    """
    by_bucket: dict[str, list[JudgedItem]] = {}
    for j in judged:
        label = (
            bucket_distance(j.item.evidence_events, thresholds)
            if thresholds is not None
            else j.item.scene_distance
        )
        by_bucket.setdefault(label, []).append(j)

    cells: dict[str, dict[str, float]] = {}
    recall: dict[str, float] = {}
    counts: dict[str, int] = {}
    for bucket, members in by_bucket.items():
        counts[bucket] = len(members)
        cells[bucket] = {
            name: _mean([getattr(m.scores, name) for m in members])
            / SCORE_MAX
            * 100.0
            for name in JUDGE_DIMENSIONS
        }
        recalls = [
            recall_at_k(m.retrieved, m.gold or m.item.evidence_events, k)
            for m in members
            if m.retrieved is not None
        ]
        if recalls:
            recall[bucket] = _mean(recalls)

    flat = [cells[b][name] for b in cells for name in JUDGE_DIMENSIONS]
    overall = _mean(flat) if flat else None

    by_reasoning: dict[str, list[float]] = {}
    for j in judged:
        item_mean = (
            _mean([getattr(j.scores, name) for name in JUDGE_DIMENSIONS])
            / SCORE_MAX
            * 100.0
        )
        by_reasoning.setdefault(j.item.reasoning_type, []).append(item_mean)
    per_reasoning = {rt: _mean(vals) for rt, vals in by_reasoning.items()}

    return EvalReport(cells, overall, per_reasoning, recall, k, counts)


# --- run comparison -------------------------------------------------------------


@dataclass(frozen=True)
class RunDelta:
    """Cellwise difference between two reports (a minus b)."""

    cells: dict[str, dict[str, float]]
    overall_delta: float | None
    largest_drop: tuple[str, str, float] | None

    def to_dict(self) -> dict[str, object]:
        doc: dict[str, object] = {
            "cells": {b: dict(m) for b, m in sorted(self.cells.items())},
        }
        if self.overall_delta is not None:
            doc["overall_delta"] = self.overall_delta
        if self.largest_drop is not None:
            bucket, metric, delta = self.largest_drop
            doc["largest_drop"] = {"bucket": bucket, "metric": metric, "delta": delta}
        return doc


def compare_runs(a: EvalReport, b: EvalReport) -> RunDelta:
    """Cellwise a - b, flagging the cell that dropped the most."""
    if sorted(a.cells) != sorted(b.cells):
        raise ShapeMismatchError(
            f"bucket sets differ: {sorted(a.cells)} vs {sorted(b.cells)}"
        )
    deltas: dict[str, dict[str, float]] = {}
    worst: tuple[str, str, float] | None = None
    for bucket in a.cells:
        if sorted(a.cells[bucket]) != sorted(b.cells[bucket]):
            raise ShapeMismatchError(f"metric sets differ in bucket {bucket!r}")
        deltas[bucket] = {}
        for metric in JUDGE_DIMENSIONS:
            if metric not in a.cells[bucket]:
                continue
            delta = a.cells[bucket][metric] - b.cells[bucket][metric]
            deltas[bucket][metric] = delta
            if worst is None or delta < worst[2]:
                worst = (bucket, metric, delta)
    overall_delta = (
        a.overall - b.overall
        if a.overall is not None and b.overall is not None
        else None
    )
    return RunDelta(deltas, overall_delta, worst)


# --- text rendering -------------------------------------------------------------

_BUCKET_ORDER = ("short", "medium", "far")


def _ordered_buckets(keys: Iterable[str]) -> list[str]:
    known = [b for b in _BUCKET_ORDER if b in keys]
    extra = sorted(k for k in keys if k not in _BUCKET_ORDER)
    return known + extra


def render_report_text(report: EvalReport) -> str:
    """Fixed-width table of the report; 2-decimal display, full precision kept."""
    lines = ["# overall averages the present bucket x dimension cells"]
    header = (
        f"{'bucket':<8} {'n':>4} "
        + " ".join(f"{name:>18}" for name in JUDGE_DIMENSIONS)
        + f" {'recall@' + str(report.k):>10}"
    )
    lines.append(header)
    for bucket in _ordered_buckets(report.cells):
        row = f"{bucket:<8} {report.counts.get(bucket, 0):>4} "
        row += " ".join(
            f"{report.cells[bucket][name]:>18.2f}" for name in JUDGE_DIMENSIONS
        )
        recall = report.recall.get(bucket)
        row += f" {recall:>10.2f}" if recall is not None else f" {'-':>10}"
        lines.append(row)
    if report.overall is not None:
        lines.append(f"overall {report.overall:.2f}")
    for rt in sorted(report.per_reasoning):
        lines.append(f"reasoning {rt:<14} {report.per_reasoning[rt]:.2f}")
    return "\n".join(lines) + "\n"


def render_delta_text(delta: RunDelta) -> str:
    lines = [f"{'bucket':<8} " + " ".join(f"{n:>18}" for n in JUDGE_DIMENSIONS)]
    for bucket in _ordered_buckets(delta.cells):
        row = f"{bucket:<8} "
        row += " ".join(
            f"{delta.cells[bucket].get(name, float('nan')):>+18.2f}"
            for name in JUDGE_DIMENSIONS
        )
        lines.append(row)
    if delta.overall_delta is not None:
        lines.append(f"overall {delta.overall_delta:+.2f}")
    if delta.largest_drop is not None:
        bucket, metric, value = delta.largest_drop
        lines.append(f"largest drop {bucket}/{metric} {value:+.2f}")
    return "\n".join(lines) + "\n"
