"""Canonical vocabularies and prompt builders for every external model call.

Everything the package says to a model, and every schema it expects back,
is defined here in one place: the reasoning-type taxonomy, the validator
criteria, the judge dimensions, and the four prompt templates (slot
assignment, validation, refinement, judging). Parsers elsewhere key off
the same canonical names, so renaming a criterion is a one-file change.
"""

from __future__ import annotations

import json
from typing import Mapping, Sequence

REASONING_TYPES = (
    "causal",
    "narrative",
    "character",
    "thematic",
    "goal",
    "social",
    "hypothetical",
)

DISTANCE_LABELS = ("short", "medium", "far")

# Validator criteria, each scored 0 (fails), 1 (partial), or 2 (fully met).
# Order is the canonical report order.
VALIDATOR_CRITERIA = (
    "video_grounded_framing",
    "answer_faithfulness",
    "events_completeness",
    "minimal_events",
    "clarity_challenge",
    "reasoning_required",
    "character_agnostic",
    "content_identifiability",
)

CRITERION_GLOSSES: Mapping[str, str] = {
    "video_grounded_framing": (
        "the question is framed around what happens on screen and is "
        "answerable by watching, without outside trivia"
    ),
    "answer_faithfulness": (
        "the answer is correct given the listed evidence segments"
    ),
    "events_completeness": (
        "the evidence list covers every segment needed to answer"
    ),
    "minimal_events": (
        "the evidence list contains no segment the answer does not need"
    ),
    "clarity_challenge": (
        "the question is unambiguous yet cannot be answered from a single "
        "glance at one shot"
    ),
    "reasoning_required": (
        "answering requires connecting information across segments, not "
        "looking up a single fact"
    ),
    "character_agnostic": (
        "people are referred to by role or appearance, never by actor or "
        "character name"
    ),
    "content_identifiability": (
        "the content the question points at can be located in the video "
        "without guesswork"
    ),
}

JUDGE_DIMENSIONS = ("comprehensiveness", "depth", "evidence", "reasoning")

JUDGE_GLOSSES: Mapping[str, str] = {
    "comprehensiveness": "covers all key points of the reference answer",
    "depth": "explains rather than merely states; insight over surface",
    "evidence": "grounded in the correct moments of the video",
    "reasoning": "the logical chain from evidence to conclusion holds",
}

# Line prefix the refinement prompt uses to carry the item being repaired.
# The offline mock echoes the JSON that follows it, so keep it stable.
ORIGINAL_ITEM_PREFIX = "Original item: "


def slot_assignment_prompt(
    n_slots: int,
    slot_summaries: Sequence[tuple[int, Sequence[str]]],
    clip_index: int,
    start_s: float,
    end_s: float,
    description: str,
) -> str:
    """Prompt asking the model to place one new clip into a storyline slot.

    ``slot_summaries`` must cover all ``n_slots`` slots, each with up to a
    few representative member descriptions (empty list for an empty slot).
    """
    lines = [
        f"You are organizing a long video into {n_slots} fixed storyline slots.",
        "Each slot collects clips that belong to one coherent storyline:",
        "the same characters, goals, or cause-and-effect chain.",
        "",
        "Current slots:",
    ]
    for slot_id, samples in slot_summaries:
        if samples:
            joined = " | ".join(samples)
            lines.append(f"Slot {slot_id}: {joined}")
        else:
            lines.append(f"Slot {slot_id}: (empty)")
    lines += [
        "",
        f"New clip {clip_index} [{start_s:.1f}s-{end_s:.1f}s]: {description}",
        "",
        "Decide which slot this clip belongs to. If it continues a storyline",
        "already present, pick that slot. If it starts something new, pick",
        "the lowest-numbered empty slot. If every slot is occupied and none",
        "clearly matches, pick the closest one.",
        "",
        'Reply with exactly one JSON object: {"slot": <integer>, "reason":',
        '"<one short sentence>"}. No code fences, no text before or after.',
    ]
    return "\n".join(lines)


def validation_prompt(item: Mapping[str, object], events: Sequence[str]) -> str:
    """Prompt asking the model to score a QA item on the eight criteria."""
    lines = [
        "You are auditing one question-answer item written about a video.",
        "The numbered list below describes the video's events in order.",
        "",
        "Events:",
    ]
    lines += [f"{i}. {event}" for i, event in enumerate(events)]
    lines += [
        "",
        "Item under review:",
        json.dumps(dict(item), ensure_ascii=False),
        "",
        "Score each criterion 0 (fails), 1 (partially met), or 2 (fully met):",
    ]
    lines += [
        f"- {name}: {CRITERION_GLOSSES[name]}" for name in VALIDATOR_CRITERIA
    ]
    lines += [
        "",
        "Reply with exactly one JSON object whose keys are the eight",
        'criterion names above, each mapping to {"score": <0|1|2>,',
        '"explanation": "<one sentence>"}. No code fences, no extra text.',
    ]
    return "\n".join(lines)


def refinement_prompt(
    item: Mapping[str, object], zero_criteria: Sequence[str]
) -> str:
    """Prompt asking the model to repair a QA item that passed the audit.

    ``zero_criteria`` names the criteria scored 0; the rewrite must fix
    exactly those while preserving what the item asks about.
    """
    lines = [
        "Rewrite the question-answer item below so it fully satisfies the",
        "quality criteria, changing as little as possible.",
        "",
    ]
    if zero_criteria:
        lines.append("These criteria failed outright and must be fixed:")
        lines += [
            f"- {name}: {CRITERION_GLOSSES[name]}" for name in zero_criteria
        ]
    else:
        lines.append("No criterion failed outright; polish weak spots only.")
    lines += [
        "",
        ORIGINAL_ITEM_PREFIX + json.dumps(dict(item), ensure_ascii=False),
        "",
        "Reply with exactly one JSON object with the same fields:",
        '"question", "answer", "evidence_events" (2 to 20 integers),',
        f'"reasoning_type" (one of {", ".join(REASONING_TYPES)}),',
        f'"scene_distance" (one of {", ".join(DISTANCE_LABELS)}), and the',
        'unchanged "movie_id". No code fences, no extra text.',
    ]
    return "\n".join(lines)


def judge_prompt(question: str, gold_answer: str, predicted_answer: str) -> str:
    """Prompt asking the model to grade a predicted answer against gold."""
    lines = [
        "Grade the candidate answer to a question about a video against the",
        "reference answer. Use integers from 0 (worthless) to 5 (flawless)",
        "on each dimension:",
    ]
    lines += [f"- {name}: {JUDGE_GLOSSES[name]}" for name in JUDGE_DIMENSIONS]
    lines += [
        "",
        f"Question: {question}",
        f"Reference answer: {gold_answer}",
        f"Candidate answer: {predicted_answer}",
        "",
        "Reply with exactly one JSON object whose keys are the four",
        "dimension names, each mapping to an integer score. No code fences,",
        "no extra text.",
    ]
    return "\n".join(lines)
