"""Narrative memory bank: greedy sequential assignment of clips to slots.

A bank partitions a video's clips into N storyline slots. Clips arrive in
temporal order and each is placed exactly once, either by a deterministic
heuristic (centroid similarity) or by an external model through the
gateway. A finished bank is immutable in practice and safe to read
concurrently; building is strictly sequential because each decision sees
the slots as the previous decisions left them.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .embeddings import ClipRecord, EmbeddingStore, l2_normalize
from .errors import (
    AlreadyAssignedError,
    AssignerError,
    EmptyClipError,
    InvalidSlotCountError,
    IoError,
    MemoryBuildError,
    NavqaError,
    SchemaError,
    SlotOutOfRangeError,
    UnknownClipError,
)
from .gateway import GatewayRequest, parse_slot_response
from .prompts import slot_assignment_prompt

DEFAULT_N_SLOTS = 16
DEFAULT_TAU = 0.55

BANK_FORMAT_VERSION = 1

# How many member descriptions represent a slot in the assignment prompt.
SUMMARY_SAMPLES_PER_SLOT = 3


class NarrativeSlot:
    """One storyline: member clips in assignment order, with reasons."""

    def __init__(self, slot_id: int):
        self.slot_id = slot_id
        self.clip_indices: list[int] = []
        self.reasons: list[str] = []
        self.centroid: np.ndarray | None = None
        self._mean_sum: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.clip_indices)

    def add_member(self, clip_index: int, reason: str, mean_vector: np.ndarray):
        self.clip_indices.append(clip_index)
        self.reasons.append(reason)
        v = np.asarray(mean_vector, dtype=np.float64)
        self._mean_sum = v.copy() if self._mean_sum is None else self._mean_sum + v
        self.centroid = l2_normalize(self._mean_sum / len(self.clip_indices))

    def __eq__(self, other: object) -> bool:
        # Centroid is assigner scratch state, not part of slot identity.
        if not isinstance(other, NarrativeSlot):
            return NotImplemented
        return (
            self.slot_id == other.slot_id
            and self.clip_indices == other.clip_indices
            and self.reasons == other.reasons
        )

    def __repr__(self) -> str:
        return f"NarrativeSlot(slot_id={self.slot_id}, clips={self.clip_indices})"


class MemoryBank:
    """N slots partitioning every processed clip; append-only during build."""

    def __init__(self, n_slots: int, assigner_kind: str = "heuristic"):
        if n_slots < 1:
            raise InvalidSlotCountError("a memory bank needs at least one slot")
        self.n_slots = n_slots
        self.assigner_kind = assigner_kind
        self.slots = [NarrativeSlot(i) for i in range(n_slots)]
        self._slot_of: dict[int, int] = {}

    @property
    def n_assigned(self) -> int:
        return len(self._slot_of)

    def is_assigned(self, clip_index: int) -> bool:
        return clip_index in self._slot_of

    def slot_of(self, clip_index: int) -> int:
        try:
            return self._slot_of[clip_index]
        except KeyError:
            raise UnknownClipError(f"clip {clip_index} is not in the bank") from None

    def assigned_clips(self) -> list[int]:
        return sorted(self._slot_of)

    def _register(self, clip_index: int, slot_id: int):
        self._slot_of[clip_index] = slot_id

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MemoryBank):
            return NotImplemented
        return (
            self.n_slots == other.n_slots
            and self.assigner_kind == other.assigner_kind
            and self.slots == other.slots
        )

    def __repr__(self) -> str:
        used = sum(1 for s in self.slots if s.clip_indices)
        return (
            f"MemoryBank(n_slots={self.n_slots}, used={used}, "
            f"clips={self.n_assigned}, assigner={self.assigner_kind!r})"
        )


def new_bank(n_slots: int, assigner_kind: str = "heuristic") -> MemoryBank:
    """A bank with ``n_slots`` empty slots, ids 0..n_slots-1."""
    return MemoryBank(n_slots, assigner_kind)


# --- assigners -----------------------------------------------------------------


class Assigner(Protocol):
    kind: str

    def assign(
        self, bank: MemoryBank, clip: ClipRecord, frame_set: np.ndarray
    ) -> tuple[int, str]: ...


def heuristic_assign(bank: MemoryBank, clip_mean_vector: np.ndarray, tau: float) -> int:
    """Decision rule of the deterministic assigner.

    Returns the most-similar nonempty slot if its centroid similarity
    reaches ``tau``; otherwise the lowest-id empty slot; if every slot is
    occupied and none reaches ``tau``, the most-similar slot regardless.
    """
    best_slot = -1
    best_sim = -2.0
    empty_slot = -1
    for slot in bank.slots:
        if slot.centroid is None:
            if empty_slot < 0:
                empty_slot = slot.slot_id
            continue
        sim = float(np.dot(slot.centroid, clip_mean_vector))
        if sim > best_sim:
            best_sim = sim
            best_slot = slot.slot_id
    if best_slot >= 0 and best_sim >= tau:
        return best_slot
    if empty_slot >= 0:
        return empty_slot
    return best_slot


class HeuristicAssigner:
    """Offline assigner: centroid similarity against threshold ``tau``."""

    kind = "heuristic"

    def __init__(self, tau: float = DEFAULT_TAU):
        if not 0.0 < tau <= 1.0:
            raise AssignerError(f"tau must be in (0, 1], got {tau}")
        self.tau = tau

    def assign(
        self, bank: MemoryBank, clip: ClipRecord, frame_set: np.ndarray
    ) -> tuple[int, str]:
        mean_vec = clip_mean_vector(frame_set)
        slot_id = heuristic_assign(bank, mean_vec, self.tau)
        slot = bank.slots[slot_id]
        if slot.centroid is None:
            return slot_id, "new storyline"
        sim = float(np.dot(slot.centroid, mean_vec))
        if sim >= self.tau:
            return slot_id, f"continues storyline (similarity {sim:.4f})"
        return slot_id, f"closest storyline (similarity {sim:.4f})"


class ExternalAssigner:
    """Assigner that asks a model over the gateway for each placement."""

    kind = "external"

    def __init__(self, gateway):
        self._gateway = gateway
        self._descriptions: dict[int, str] = {}

    def assign(
        self, bank: MemoryBank, clip: ClipRecord, frame_set: np.ndarray
    ) -> tuple[int, str]:
        self._descriptions[clip.clip_index] = clip.description
        summaries = slot_summaries(bank, self._descriptions)
        return external_assign(self._gateway, summaries, clip)


def clip_mean_vector(frame_set: np.ndarray) -> np.ndarray:
    """Unit-norm mean of a clip's frame vectors (float64)."""
    frames = np.asarray(frame_set, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise EmptyClipError("a clip needs at least one frame vector")
    return l2_normalize(frames.mean(axis=0))


def slot_summaries(
    bank: MemoryBank, descriptions: dict[int, str]
) -> list[tuple[int, list[str]]]:
    """Per-slot representative descriptions (first, middle, last member)."""
    out: list[tuple[int, list[str]]] = []
    for slot in bank.slots:
        members = slot.clip_indices
        if not members:
            out.append((slot.slot_id, []))
            continue
        picks = sorted({0, len(members) // 2, len(members) - 1})
        samples = [
            descriptions.get(members[i], f"clip {members[i]}") for i in picks
        ][:SUMMARY_SAMPLES_PER_SLOT]
        out.append((slot.slot_id, samples))
    return out


def external_assign(
    gateway, slot_summaries: Sequence[tuple[int, Sequence[str]]], new_clip: ClipRecord
) -> tuple[int, str]:
    """One model call deciding the new clip's slot.

    ``slot_summaries`` must cover every slot of the bank; the reply must be
    a strict JSON object with an integer slot inside [0, n_slots).
    """
    n_slots = len(slot_summaries)
    prompt = slot_assignment_prompt(
        n_slots,
        slot_summaries,
        new_clip.clip_index,
        new_clip.start_s,
        new_clip.end_s,
        new_clip.description,
    )
    response = gateway.send(GatewayRequest(task="slot_assign", prompt=prompt))
    slot_id, reason = parse_slot_response(response.raw_text)
    if not 0 <= slot_id < n_slots:
        raise SlotOutOfRangeError(
            f"model chose slot {slot_id}, bank has slots 0..{n_slots - 1}"
        )
    return slot_id, reason


# --- building ------------------------------------------------------------------


def assign_clip(
    bank: MemoryBank, clip: ClipRecord, frame_set: np.ndarray, assigner: Assigner
) -> tuple[int, str]:
    """Place one clip into the bank; assignment is final once made."""
    if bank.is_assigned(clip.clip_index):
        raise AlreadyAssignedError(f"clip {clip.clip_index} is already in the bank")
    mean_vec = clip_mean_vector(frame_set)
    slot_id, reason = assigner.assign(bank, clip, frame_set)
    if not 0 <= slot_id < bank.n_slots:
        raise SlotOutOfRangeError(
            f"assigner chose slot {slot_id}, bank has slots 0..{bank.n_slots - 1}"
        )
    bank.slots[slot_id].add_member(clip.clip_index, reason, mean_vec)
    bank._register(clip.clip_index, slot_id)
    return slot_id, reason


def build_memory(
    clips: Iterable[ClipRecord],
    store: EmbeddingStore,
    assigner: Assigner,
    n_slots: int = DEFAULT_N_SLOTS,
) -> MemoryBank:
    """Assign every clip, in order, to exactly one slot.

    Any failure aborts the build and names the clip it tripped on; a
    partially built bank is never returned.
    """
    bank = MemoryBank(n_slots, assigner_kind=getattr(assigner, "kind", "external"))
    previous = None
    for clip in clips:
        if previous is not None and clip.clip_index <= previous:
            raise MemoryBuildError(
                clip.clip_index, f"clips must arrive in increasing order (after {previous})"
            )
        previous = clip.clip_index
        try:
            frame_set = store.clip_frame_set(clip.clip_index)
            assign_clip(bank, clip, frame_set, assigner)
        except MemoryBuildError:
            raise
        except NavqaError as exc:
            raise MemoryBuildError(clip.clip_index, str(exc)) from exc
    return bank


# --- persistence ---------------------------------------------------------------


def bank_doc(bank: MemoryBank) -> dict[str, object]:
    """The bank's persistent form (centroids are scratch state, not saved)."""
    return {
        "version": BANK_FORMAT_VERSION,
        "n_slots": bank.n_slots,
        "assigner": bank.assigner_kind,
        "slots": [
            {
                "slot_id": slot.slot_id,
                "clips": list(slot.clip_indices),
                "reasons": list(slot.reasons),
            }
            for slot in bank.slots
        ],
    }


def save_bank(bank: MemoryBank, path: str | Path) -> None:
    """Write the bank as a stable JSON document."""
    try:
        Path(path).write_text(
            json.dumps(bank_doc(bank), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_bank(path: str | Path) -> MemoryBank:
    """Read a bank document back; inverse of :func:`save_bank`."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: bank document must be a JSON object")
    if doc.get("version") != BANK_FORMAT_VERSION:
        raise SchemaError(f"{path}: unsupported bank version {doc.get('version')!r}")
    n_slots = doc.get("n_slots")
    assigner = doc.get("assigner")
    slots = doc.get("slots")
    if not isinstance(n_slots, int) or isinstance(n_slots, bool) or n_slots < 1:
        raise SchemaError(f"{path}: n_slots must be a positive integer")
    if assigner not in ("heuristic", "external"):
        raise SchemaError(f"{path}: unknown assigner {assigner!r}")
    if not isinstance(slots, list) or len(slots) != n_slots:
        raise SchemaError(f"{path}: expected a list of exactly {n_slots} slots")

    bank = MemoryBank(n_slots, assigner_kind=assigner)
    for position, entry in enumerate(slots):
        if not isinstance(entry, dict):
            raise SchemaError(f"{path}: slot {position} must be an object")
        slot_id = entry.get("slot_id")
        clips = entry.get("clips")
        reasons = entry.get("reasons")
        if slot_id != position:
            raise SchemaError(f"{path}: slot at position {position} has id {slot_id!r}")
        if not isinstance(clips, list) or not isinstance(reasons, list):
            raise SchemaError(f"{path}: slot {position} needs clips and reasons lists")
        if len(clips) != len(reasons):
            raise SchemaError(
                f"{path}: slot {position} has {len(clips)} clips but "
                f"{len(reasons)} reasons"
            )
        slot = bank.slots[position]
        for clip_index, reason in zip(clips, reasons):
            if not isinstance(clip_index, int) or isinstance(clip_index, bool):
                raise SchemaError(f"{path}: slot {position} has a non-integer clip")
            if not isinstance(reason, str):
                raise SchemaError(f"{path}: slot {position} has a non-string reason")
            if bank.is_assigned(clip_index):
                raise SchemaError(f"{path}: clip {clip_index} appears in two slots")
            slot.clip_indices.append(clip_index)
            slot.reasons.append(reason)
            bank._register(clip_index, position)
    return bank
