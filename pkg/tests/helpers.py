"""Shared builders for the test suite: corpora, banks, and a fake gateway."""

from __future__ import annotations

import math

import numpy as np

from navqa.embeddings import ClipRecord, EmbeddingStore
from navqa.gateway import GatewayResponse
from navqa.memory import MemoryBank, build_memory
from navqa.qa import QAItem


def unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def frames_for_target(
    rng: np.random.Generator, query: np.ndarray, z_target: float, n_frames: int
) -> list[np.ndarray]:
    """Frames whose cosine with ``query`` is ``z_target`` (up to f32 rounding)."""
    rows = []
    for _ in range(n_frames):
        u = rng.normal(size=query.shape[0])
        u = u - (u @ query) * query
        u = u / np.linalg.norm(u)
        rows.append(z_target * query + math.sqrt(1.0 - z_target**2) * u)
    return rows


def random_corpus(
    rng: np.random.Generator, n_clips: int, dim: int = 32, max_frames: int = 4
) -> tuple[EmbeddingStore, list[ClipRecord]]:
    frames = []
    clips = []
    for c in range(n_clips):
        for f in range(int(rng.integers(1, max_frames + 1))):
            frames.append((c, f, rng.normal(size=dim)))
        clips.append(ClipRecord(c, c * 32.0, (c + 1) * 32.0, f"scene {c}"))
    return EmbeddingStore.from_frames(frames), clips


class ScriptedAssigner:
    """Assigner that replays a fixed clip -> slot mapping."""

    kind = "external"

    def __init__(self, slot_for_clip: dict[int, int]):
        self.slot_for_clip = dict(slot_for_clip)

    def assign(self, bank, clip, frame_set):
        return self.slot_for_clip[clip.clip_index], "scripted"


def random_bank(
    rng: np.random.Generator,
    store: EmbeddingStore,
    clips: list[ClipRecord],
    n_slots: int,
) -> MemoryBank:
    assignment = {c.clip_index: int(rng.integers(0, n_slots)) for c in clips}
    return build_memory(clips, store, ScriptedAssigner(assignment), n_slots=n_slots)


class FakeGateway:
    """Gateway stand-in replaying canned texts (or raising canned errors)."""

    def __init__(self, replies=None, handler=None):
        self.replies = list(replies or [])
        self.handler = handler
        self.requests = []

    def send(self, request):
        self.requests.append(request)
        if self.handler is not None:
            out = self.handler(request)
        else:
            assert self.replies, "FakeGateway ran out of canned replies"
            out = self.replies.pop(0)
        if isinstance(out, Exception):
            raise out
        return GatewayResponse(raw_text=out)


def make_item(**overrides) -> QAItem:
    base = {
        "question": "Why does the traveler go back to the station at night?",
        "answer": "To recover the case left behind during the evacuation.",
        "evidence_events": [2, 9, 14],
        "reasoning_type": "causal",
        "scene_distance": "medium",
        "movie_id": "mv-01",
    }
    base.update(overrides)
    return QAItem.from_dict(base)


def validator_reply(scores: dict[str, int] | None = None, default: int = 2) -> str:
    """Canned validator JSON covering all eight criteria."""
    import json

    from navqa.prompts import VALIDATOR_CRITERIA

    scores = scores or {}
    return json.dumps(
        {
            name: {
                "score": scores.get(name, default),
                "explanation": f"checked {name}",
            }
            for name in VALIDATOR_CRITERIA
        }
    )
