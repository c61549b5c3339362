"""QA data model: loading, distance bucketing, and the filtering pipeline.

A dataset is a JSON array or JSON Lines file of items, each tying a
question and answer to the evidence events that support them, one of
seven reasoning types, and a short/medium/far scene-distance label.
The filtering pipeline scores every item on eight 0/1/2 criteria through
the model gateway, discards low scorers, and asks the model to repair
the rest; whatever it emits must pass schema validation again.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    GatewayError,
    IoError,
    MalformedResponseError,
    PipelineError,
    SchemaError,
    TooFewEvidencesError,
)
from .gateway import GatewayRequest, parse_json_object
from .prompts import (
    DISTANCE_LABELS,
    REASONING_TYPES,
    VALIDATOR_CRITERIA,
    refinement_prompt,
    validation_prompt,
)

MIN_EVIDENCES = 2
MAX_EVIDENCES = 20

DEFAULT_DISCARD_THRESHOLD = 8


@dataclass(frozen=True)
class QAItem:
    """One question-answer pair grounded in a list of evidence events."""

    question: str
    answer: str
    evidence_events: tuple[int, ...]
    reasoning_type: str
    scene_distance: str
    movie_id: str

    @classmethod
    def from_dict(cls, obj: object, where: str = "item") -> "QAItem":
        if not isinstance(obj, dict):
            raise SchemaError(f"{where}: must be a JSON object")
        for field_name in (
            "question",
            "answer",
            "evidence_events",
            "reasoning_type",
            "scene_distance",
            "movie_id",
        ):
            if field_name not in obj:
                raise SchemaError(f"{where}: missing field {field_name!r}")
        question = obj["question"]
        answer = obj["answer"]
        evidence = obj["evidence_events"]
        reasoning = obj["reasoning_type"]
        distance = obj["scene_distance"]
        movie_id = obj["movie_id"]
        for name, value in (
            ("question", question),
            ("answer", answer),
            ("movie_id", movie_id),
        ):
            if not isinstance(value, str) or not value:
                raise SchemaError(f"{where}: {name} must be a nonempty string")
        if not isinstance(evidence, list) or not (
            MIN_EVIDENCES <= len(evidence) <= MAX_EVIDENCES
        ):
            raise SchemaError(
                f"{where}: evidence_events needs {MIN_EVIDENCES} to "
                f"{MAX_EVIDENCES} entries"
            )
        for e in evidence:
            if not isinstance(e, int) or isinstance(e, bool) or e < 0:
                raise SchemaError(
                    f"{where}: evidence_events must be non-negative integers"
                )
        if reasoning not in REASONING_TYPES:
            raise SchemaError(
                f"{where}: reasoning_type {reasoning!r} not one of {REASONING_TYPES}"
            )
        if distance not in DISTANCE_LABELS:
            raise SchemaError(
                f"{where}: scene_distance {distance!r} not one of {DISTANCE_LABELS}"
            )
        return cls(question, answer, tuple(evidence), reasoning, distance, movie_id)

    def to_dict(self) -> dict[str, object]:
        return {
            "question": self.question,
            "answer": self.answer,
            "evidence_events": list(self.evidence_events),
            "reasoning_type": self.reasoning_type,
            "scene_distance": self.scene_distance,
            "movie_id": self.movie_id,
        }


def load_qa(path: str | Path) -> list[QAItem]:
    """Read a dataset file, either a JSON array or JSON Lines.

    Errors carry the array position or line number of the offending item.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(doc, list):
            raise SchemaError(f"{path}: expected a JSON array")
        return [
            QAItem.from_dict(entry, f"{path}[{i}]") for i, entry in enumerate(doc)
        ]
    items: list[QAItem] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
        items.append(QAItem.from_dict(obj, f"{path}:{lineno}"))
    return items


def save_qa(items: Iterable[QAItem], path: str | Path) -> None:
    """Write items as JSON Lines (the pipeline's output format)."""
    lines = [json.dumps(item.to_dict(), ensure_ascii=False) for item in items]
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# --- scene distance -------------------------------------------------------------


@dataclass(frozen=True)
class DistanceThresholds:
    """Span cutoffs: short up to short_max, medium up to medium_max, else far."""

    short_max: int = 4
    medium_max: int = 15

    def __post_init__(self):
        if not 0 < self.short_max < self.medium_max:
            raise SchemaError(
                f"need 0 < short_max < medium_max, got "
                f"{self.short_max}/{self.medium_max}"
            )


def bucket_distance(
    evidence_events: Sequence[int],
    thresholds: DistanceThresholds = DistanceThresholds(),
) -> str:
    """Label how far apart an item's evidence lies on the timeline.

    The span is max - min over evidence indices; the label is monotone in
    the span, so widening evidence never moves an item toward ``short``.
    """
    if len(evidence_events) < 2:
        raise TooFewEvidencesError("distance needs at least two evidence indices")
    span = max(evidence_events) - min(evidence_events)
    if span <= thresholds.short_max:
        return "short"
    if span <= thresholds.medium_max:
        return "medium"
    return "far"


def distance_disagreements(
    items: Sequence[QAItem],
    thresholds: DistanceThresholds = DistanceThresholds(),
) -> list[tuple[int, str, str]]:
    """(position, stored, recomputed) for items whose stored label disagrees.

    Stored labels are preserved everywhere by default; this reports what a
    recompute from spans would change.
    """
    out = []
    for i, item in enumerate(items):
        computed = bucket_distance(item.evidence_events, thresholds)
        if computed != item.scene_distance:
            out.append((i, item.scene_distance, computed))
    return out


# --- scene-to-clip mapping ------------------------------------------------------


def load_scene_map(path: str | Path) -> dict[int, int]:
    """Read an optional JSONL mapping of scene indices to clip indices."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    mapping: dict[int, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
        if not isinstance(obj, dict):
            raise SchemaError(f"{path}:{lineno}: entry must be an object")
        scene = obj.get("scene_index")
        clip = obj.get("clip_index")
        for name, value in (("scene_index", scene), ("clip_index", clip)):
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise SchemaError(
                    f"{path}:{lineno}: {name} must be a non-negative integer"
                )
        if scene in mapping:
            raise SchemaError(f"{path}:{lineno}: scene {scene} mapped twice")
        mapping[scene] = clip
    return mapping


def map_evidence(item: QAItem, scene_map: Mapping[int, int]) -> tuple[int, ...]:
    """Evidence events translated to clip indices.

    Scenes absent from the map keep their index (scene and clip index
    spaces coincide unless a mapping says otherwise).
    """
    return tuple(scene_map.get(e, e) for e in item.evidence_events)


# --- validation and refinement --------------------------------------------------


@dataclass(frozen=True)
class ValidatorReport:
    """Eight criterion scores in {0,1,2} with explanations; total in [0,16]."""

    criterion_scores: dict[str, int]
    explanations: dict[str, str]
    total: int

    def zero_criteria(self) -> list[str]:
        return [n for n in VALIDATOR_CRITERIA if self.criterion_scores[n] == 0]


def validate_item(
    gateway, item: QAItem, events: Sequence[str]
) -> ValidatorReport:
    """Score one item on the eight criteria via the gateway.

    Raises:
        MalformedResponseError: reply missing criteria or out-of-range scores.
        GatewayError: the call itself failed.
    """
    if not events:
        raise SchemaError("validation needs a nonempty event list")
    prompt = validation_prompt(item.to_dict(), events)
    response = gateway.send(GatewayRequest(task="validate", prompt=prompt))
    obj = parse_json_object(response.raw_text)
    scores: dict[str, int] = {}
    explanations: dict[str, str] = {}
    for name in VALIDATOR_CRITERIA:
        entry = obj.get(name)
        if not isinstance(entry, dict):
            raise MalformedResponseError(f"criterion {name!r} missing from reply")
        score = entry.get("score")
        if isinstance(score, bool) or score not in (0, 1, 2):
            raise MalformedResponseError(
                f"criterion {name!r} score must be 0, 1, or 2, got {score!r}"
            )
        explanation = entry.get("explanation")
        if not isinstance(explanation, str):
            raise MalformedResponseError(f"criterion {name!r} needs an explanation")
        scores[name] = score
        explanations[name] = explanation
    return ValidatorReport(scores, explanations, sum(scores.values()))


def refine_item(
    gateway,
    item: QAItem,
    report: ValidatorReport,
    discard_threshold: int = DEFAULT_DISCARD_THRESHOLD,
) -> QAItem | None:
    """Discard the item if it scored below threshold, else have it repaired.

    Returns None for a discarded item. The repaired item must pass schema
    validation; criteria scored 0 are named in the repair request.
    """
    if report.total < discard_threshold:
        return None
    prompt = refinement_prompt(item.to_dict(), report.zero_criteria())
    response = gateway.send(GatewayRequest(task="refine", prompt=prompt))
    obj = parse_json_object(response.raw_text)
    return QAItem.from_dict(obj, "refined item")


@dataclass(frozen=True)
class PipelineStats:
    n_input: int
    n_kept: int
    n_discarded: int
    mean_validator_total: float
    per_reasoning: dict[str, int]
    per_distance: dict[str, int]

    def to_dict(self) -> dict[str, object]:
        return {
            "n_input": self.n_input,
            "n_kept": self.n_kept,
            "n_discarded": self.n_discarded,
            "mean_validator_total": self.mean_validator_total,
            "per_reasoning": dict(sorted(self.per_reasoning.items())),
            "per_distance": dict(sorted(self.per_distance.items())),
        }


def filter_pipeline(
    items: Sequence[QAItem],
    events_by_movie: Mapping[str, Sequence[str]],
    gateway,
    discard_threshold: int = DEFAULT_DISCARD_THRESHOLD,
) -> tuple[list[QAItem], PipelineStats]:
    """Validate then refine-or-discard every item.

    Kept items are exactly the refined survivors, all schema-valid. Any
    gateway or schema failure aborts the whole run with a progress report;
    a partial result is never returned.
    """
    missing = sorted({i.movie_id for i in items if i.movie_id not in events_by_movie})
    if missing:
        raise PipelineError(f"no events for movies: {', '.join(missing)}")

    kept: list[QAItem] = []
    totals: list[int] = []
    discarded = 0
    for position, item in enumerate(items):
        try:
            report = validate_item(gateway, item, events_by_movie[item.movie_id])
            totals.append(report.total)
            refined = refine_item(gateway, item, report, discard_threshold)
        except (GatewayError, MalformedResponseError, SchemaError) as exc:
            raise PipelineError(
                f"aborted at item {position + 1} of {len(items)} "
                f"({len(kept)} kept, {discarded} discarded so far): {exc}"
            ) from exc
        if refined is None:
            discarded += 1
        else:
            kept.append(refined)

    reasoning_counts = Counter(i.reasoning_type for i in kept)
    distance_counts = Counter(i.scene_distance for i in kept)
    stats = PipelineStats(
        n_input=len(items),
        n_kept=len(kept),
        n_discarded=discarded,
        mean_validator_total=math.fsum(totals) / len(totals) if totals else 0.0,
        per_reasoning=dict(reasoning_counts),
        per_distance=dict(distance_counts),
    )
    return kept, stats


# --- statistics -----------------------------------------------------------------


@dataclass(frozen=True)
class DatasetStats:
    total_items: int
    total_evidences: int
    mean_evidences: float
    per_reasoning: dict[str, int]
    per_distance: dict[str, int]
    per_movie: dict[str, int]

    def to_dict(self) -> dict[str, object]:
        return {
            "total_items": self.total_items,
            "total_evidences": self.total_evidences,
            "mean_evidences": self.mean_evidences,
            "per_reasoning": dict(sorted(self.per_reasoning.items())),
            "per_distance": dict(sorted(self.per_distance.items())),
            "per_movie": dict(sorted(self.per_movie.items())),
        }


def dataset_stats(items: Sequence[QAItem]) -> DatasetStats:
    """Count items, evidence segments, and category breakdowns."""
    total_evidences = sum(len(i.evidence_events) for i in items)
    return DatasetStats(
        total_items=len(items),
        total_evidences=total_evidences,
        mean_evidences=total_evidences / len(items) if items else 0.0,
        per_reasoning=dict(Counter(i.reasoning_type for i in items)),
        per_distance=dict(Counter(i.scene_distance for i in items)),
        per_movie=dict(Counter(i.movie_id for i in items)),
    )
