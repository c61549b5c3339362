"""Narrative-aware retrieval: relevance scoring chain and exact top-k ranking.

Scoring happens in three steps. Each clip gets a relevance ``z``: the mean
cosine between the query and the clip's frame vectors. Each nonempty slot
gets a score ``S``: a max-boosted blend ``(1 - alpha) * mean(z) + alpha *
max(z)`` over its members. Each clip's final key is ``r = z + lambda * S``
using its own slot's ``S``, and clips are ranked by descending ``r`` with
ties broken by ascending clip index.

:func:`retrieve` is the production path (vectorized); :func:`oracle_rank`
recomputes everything with naive per-frame loops and shares no code with
it, so the two can cross-check each other. Both paths follow the same
formula order: mean first, then blend, then boost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .embeddings import UNIT_NORM_TOL, ZERO_NORM_FLOOR, EmbeddingStore
from .errors import (
    AlphaOutOfRangeError,
    BankStoreMismatchError,
    DimMismatchError,
    EmptyClipError,
    EmptySlotScoresError,
    NavqaError,
    NegativeLambdaError,
    UnknownClipError,
    ZeroVectorError,
)
from .memory import MemoryBank

DEFAULT_ALPHA = 0.5
DEFAULT_LAMBDA = 0.3
DEFAULT_TOP_K = 20


@dataclass(frozen=True)
class RetrievalParams:
    """Scoring knobs: blend weight, slot boost weight, result length."""

    alpha: float = DEFAULT_ALPHA
    lam: float = DEFAULT_LAMBDA
    top_k: int = DEFAULT_TOP_K

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise AlphaOutOfRangeError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.lam < 0.0:
            raise NegativeLambdaError(f"lambda must be >= 0, got {self.lam}")
        if self.top_k < 1:
            raise NavqaError(f"top_k must be >= 1, got {self.top_k}")

    def to_dict(self) -> dict[str, object]:
        return {"alpha": self.alpha, "lambda": self.lam, "top_k": self.top_k}


@dataclass(frozen=True)
class ScoreBreakdown:
    """All scoring stages for one clip, for auditability of a ranking."""

    clip_index: int
    z: float
    slot_id: int
    slot_score: float
    r: float

    def to_dict(self) -> dict[str, object]:
        return {
            "clip_index": self.clip_index,
            "z": self.z,
            "slot_id": self.slot_id,
            "slot_score": self.slot_score,
            "r": self.r,
        }


@dataclass(frozen=True)
class RetrievalResult:
    query_id: str
    params: RetrievalParams
    ranked: tuple[ScoreBreakdown, ...]

    def clip_sequence(self) -> list[int]:
        return [b.clip_index for b in self.ranked]

    def to_report(self) -> dict[str, object]:
        return {
            "query_id": self.query_id,
            "params": self.params.to_dict(),
            "ranked": [b.to_dict() for b in self.ranked],
        }


# --- scoring primitives ---------------------------------------------------------


def clip_query_score(query: np.ndarray, frame_set: np.ndarray) -> float:
    """Clip-query relevance z: mean cosine over the clip's frames.

    Summation is order-independent (exactly rounded), so permuting frames
    cannot change the result.
    """
    q = np.asarray(query, dtype=np.float64)
    frames = np.asarray(frame_set, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise EmptyClipError("a clip needs at least one frame to be scored")
    if q.ndim != 1 or q.shape[0] != frames.shape[1]:
        raise DimMismatchError(
            f"query dim {q.shape} does not match frames {frames.shape}"
        )
    dots = frames @ q
    np.clip(dots, -1.0, 1.0, out=dots)
    return math.fsum(dots) / len(dots)


def slot_score(member_z: list[float], alpha: float) -> float:
    """Slot importance S: (1 - alpha) * mean + alpha * max of member z values.

    The result is clamped into [mean, max] so the blend's range invariant
    survives float rounding at the endpoints.
    """
    if not 0.0 <= alpha <= 1.0:
        raise AlphaOutOfRangeError(f"alpha must be in [0, 1], got {alpha}")
    zs = [float(z) for z in member_z]
    if not zs:
        raise EmptySlotScoresError("slot score is undefined for an empty slot")
    mean = math.fsum(zs) / len(zs)
    top = max(zs)
    blended = (1.0 - alpha) * mean + alpha * top
    return min(max(blended, mean), top) if mean <= top else blended


def final_score(z: float, slot_score: float, lam: float) -> float:
    """Final ranking key r = z + lambda * S."""
    if lam < 0.0:
        raise NegativeLambdaError(f"lambda must be >= 0, got {lam}")
    return z + lam * slot_score


# --- engine ----------------------------------------------------------------------


def _as_unit_query(query: np.ndarray, dim: int) -> np.ndarray:
    """Validate the query and normalize it only if it drifted off unit norm."""
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != dim:
        raise DimMismatchError(f"query dim {q.shape[0]} does not match store dim {dim}")
    norm = float(np.linalg.norm(q))
    if norm < ZERO_NORM_FLOOR:
        raise ZeroVectorError("query vector has (near-)zero norm")
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        q = q / norm
    return q


def retrieve(
    bank: MemoryBank,
    store: EmbeddingStore,
    query: np.ndarray,
    params: RetrievalParams,
    query_id: str = "query",
) -> RetrievalResult:
    """Rank the bank's clips for one query and keep the top ``params.top_k``.

    Raises:
        BankStoreMismatchError: a bank clip has no embeddings in the store.
    """
    q = _as_unit_query(query, store.dim)
    dots = store.vectors.astype(np.float64) @ q
    np.clip(dots, -1.0, 1.0, out=dots)

    breakdowns: list[ScoreBreakdown] = []
    for slot in bank.slots:
        if not slot.clip_indices:
            continue
        member_z: list[float] = []
        for clip_index in slot.clip_indices:
            try:
                start, stop = store.clip_frame_range(clip_index)
            except UnknownClipError as exc:
                raise BankStoreMismatchError(
                    f"bank clip {clip_index} has no embeddings in the store"
                ) from exc
            member_z.append(math.fsum(dots[start:stop]) / (stop - start))
        s = slot_score(member_z, params.alpha)
        for clip_index, z in zip(slot.clip_indices, member_z):
            r = final_score(z, s, params.lam)
            breakdowns.append(ScoreBreakdown(clip_index, z, slot.slot_id, s, r))

    if not breakdowns:
        return RetrievalResult(query_id, params, ())
    clip_arr = np.array([b.clip_index for b in breakdowns], dtype=np.int64)
    r_arr = np.array([b.r for b in breakdowns], dtype=np.float64)
    order = np.lexsort((clip_arr, -r_arr))
    top = order[: min(params.top_k, len(breakdowns))]
    return RetrievalResult(query_id, params, tuple(breakdowns[i] for i in top))


# --- oracle -----------------------------------------------------------------------


def oracle_rank(
    bank: MemoryBank,
    store: EmbeddingStore,
    query: np.ndarray,
    params: RetrievalParams,
) -> list[ScoreBreakdown]:
    """Brute-force full ranking for verifying :func:`retrieve`.

    Recomputes every score with naive per-frame loops and a full stable
    sort; :func:`retrieve`'s result must equal this list's prefix exactly.
    """
    q_raw = [float(x) for x in np.asarray(query, dtype=np.float64).reshape(-1)]
    if len(q_raw) != store.dim:
        raise DimMismatchError(
            f"query dim {len(q_raw)} does not match store dim {store.dim}"
        )
    norm = math.sqrt(sum(x * x for x in q_raw))
    if norm < ZERO_NORM_FLOOR:
        raise ZeroVectorError("query vector has (near-)zero norm")
    q = q_raw if abs(norm - 1.0) <= UNIT_NORM_TOL else [x / norm for x in q_raw]
    q_vec = np.array(q, dtype=np.float64)

    breakdowns: list[ScoreBreakdown] = []
    for slot in bank.slots:
        if not slot.clip_indices:
            continue
        member_z: list[float] = []
        for clip_index in slot.clip_indices:
            try:
                frames = store.clip_frame_set(clip_index)
            except UnknownClipError as exc:
                raise BankStoreMismatchError(
                    f"bank clip {clip_index} has no embeddings in the store"
                ) from exc
            cos_values = []
            for row in frames:
                c = float(np.dot(row.astype(np.float64), q_vec))
                cos_values.append(min(1.0, max(-1.0, c)))
            member_z.append(sum(cos_values) / len(cos_values))
        mean = sum(member_z) / len(member_z)
        top = max(member_z)
        s = (1.0 - params.alpha) * mean + params.alpha * top
        if mean <= top:
            s = min(max(s, mean), top)
        for clip_index, z in zip(slot.clip_indices, member_z):
            r = z + params.lam * s
            breakdowns.append(ScoreBreakdown(clip_index, z, slot.slot_id, s, r))

    return sorted(breakdowns, key=lambda b: (-b.r, b.clip_index))
