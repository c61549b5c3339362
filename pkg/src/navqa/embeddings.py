"""Frame-embedding store: normalization, cosine kernel, and binary persistence.

One store holds every frame-level embedding for a video, grouped by clip.
Vectors are L2-normalized once at ingestion so that cosine similarity
reduces to a dot product everywhere downstream. The on-disk format is a
little-endian binary file:

    magic "NAVQ" (4 bytes) | version u32 (=1) | dim u32 | count u64
    then per record: clip_index u32 | frame_index u32 | dim * f32

A companion clip manifest (JSON Lines) describes the clips themselves:
``{"clip_index": int, "start_s": float, "end_s": float, "description": str}``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    BadMagicError,
    DimMismatchError,
    IoError,
    SchemaError,
    TruncatedFileError,
    UnknownClipError,
    UnsupportedVersionError,
    ZeroVectorError,
)

MAGIC = b"NAVQ"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIIQ")  # magic, version, dim, count

# Norm tolerance after ingestion; anything farther from 1 gets renormalized,
# anything below the floor is treated as an upstream encoder failure.
UNIT_NORM_TOL = 1e-6
ZERO_NORM_FLOOR = 1e-12


def l2_normalize(vector: Sequence[float] | np.ndarray) -> np.ndarray:
    """Scale a vector to unit L2 norm (float64), preserving direction.

    Raises:
        ZeroVectorError: if the norm is below 1e-12.
    """
    v = np.asarray(vector, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DimMismatchError(f"expected a nonempty 1-D vector, got shape {v.shape}")
    norm = float(np.linalg.norm(v))
    if norm < ZERO_NORM_FLOOR:
        raise ZeroVectorError("cannot normalize a (near-)zero vector")
    return v / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two unit vectors, clamped into [-1, 1].

    Inputs are assumed unit-norm (the store guarantees this), so the
    similarity is just their dot product; the clamp absorbs float rounding.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimMismatchError(f"vector dims differ: {a.shape} vs {b.shape}")
    return float(min(1.0, max(-1.0, float(np.dot(a, b)))))


@dataclass(frozen=True)
class FrameEmbedding:
    """One frame's embedding, addressed by (clip_index, frame_index)."""

    clip_index: int
    frame_index: int
    vector: np.ndarray


@dataclass(frozen=True)
class ClipRecord:
    """One clip row from the manifest: time span plus its description."""

    clip_index: int
    start_s: float
    end_s: float
    description: str


class EmbeddingStore:
    """Immutable collection of unit-norm frame embeddings grouped by clip.

    Frames of one clip occupy a contiguous range of rows; ``clip_index_map``
    maps each clip index to its ``(start, stop)`` row range. A constructed
    store is safe for concurrent reads.
    """

    def __init__(
        self,
        vectors: np.ndarray,
        clip_indices: np.ndarray,
        frame_indices: np.ndarray,
        *,
        _normalized: bool = False,
    ):
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        if vectors.ndim != 2 or vectors.shape[0] == 0:
            raise DimMismatchError("store needs a nonempty (n_frames, dim) matrix")
        clip_indices = np.asarray(clip_indices, dtype=np.uint32)
        frame_indices = np.asarray(frame_indices, dtype=np.uint32)
        if not (len(clip_indices) == len(frame_indices) == vectors.shape[0]):
            raise DimMismatchError("index arrays must match the number of rows")

        if not _normalized:
            vectors = _normalize_rows(vectors)
        order = _grouped_order(clip_indices, frame_indices)
        vectors = vectors[order]
        clip_indices = clip_indices[order]
        frame_indices = frame_indices[order]

        self._vectors = vectors
        self._clip_indices = clip_indices
        self._frame_indices = frame_indices
        self._vectors.flags.writeable = False
        self._clip_indices.flags.writeable = False
        self._frame_indices.flags.writeable = False
        self.clip_index_map = _build_clip_map(clip_indices)

    # --- construction ---------------------------------------------------

    @classmethod
    def from_frames(
        cls, frames: Iterable[tuple[int, int, Sequence[float]]]
    ) -> "EmbeddingStore":
        """Build a store from (clip_index, frame_index, vector) triples."""
        rows = list(frames)
        if not rows:
            raise DimMismatchError("cannot build a store from zero frames")
        dim = len(rows[0][2])
        vecs = np.empty((len(rows), dim), dtype=np.float32)
        clips = np.empty(len(rows), dtype=np.uint32)
        frames_idx = np.empty(len(rows), dtype=np.uint32)
        for i, (clip, frame, vector) in enumerate(rows):
            v = np.asarray(vector, dtype=np.float64)
            if v.shape != (dim,):
                raise DimMismatchError(
                    f"frame {i}: expected dim {dim}, got {v.shape}"
                )
            vecs[i] = l2_normalize(v).astype(np.float32)
            clips[i] = clip
            frames_idx[i] = frame
        return cls(vecs, clips, frames_idx, _normalized=True)

    # --- accessors --------------------------------------------------------

    @property
    def dim(self) -> int:
        return self._vectors.shape[1]

    @property
    def n_frames(self) -> int:
        return self._vectors.shape[0]

    @property
    def vectors(self) -> np.ndarray:
        """Read-only (n_frames, dim) float32 matrix in store order."""
        return self._vectors

    @property
    def clip_indices(self) -> np.ndarray:
        return self._clip_indices

    @property
    def frame_indices(self) -> np.ndarray:
        return self._frame_indices

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        return (
            np.array_equal(self._vectors, other._vectors)
            and np.array_equal(self._clip_indices, other._clip_indices)
            and np.array_equal(self._frame_indices, other._frame_indices)
        )

    def __repr__(self) -> str:
        return (
            f"EmbeddingStore(n_frames={self.n_frames}, dim={self.dim}, "
            f"n_clips={len(self.clip_index_map)})"
        )

    def clip_ids(self) -> list[int]:
        """All clip indices present, ascending."""
        return sorted(self.clip_index_map)

    def frames(self) -> Iterator[FrameEmbedding]:
        for i in range(self.n_frames):
            yield FrameEmbedding(
                int(self._clip_indices[i]),
                int(self._frame_indices[i]),
                self._vectors[i],
            )

    def clip_frame_set(self, clip_index: int) -> np.ndarray:
        """The clip's frame vectors in frame order, as a (k, dim) view."""
        try:
            start, stop = self.clip_index_map[int(clip_index)]
        except KeyError:
            raise UnknownClipError(f"clip {clip_index} has no embeddings") from None
        return self._vectors[start:stop]

    def clip_frame_range(self, clip_index: int) -> tuple[int, int]:
        try:
            return self.clip_index_map[int(clip_index)]
        except KeyError:
            raise UnknownClipError(f"clip {clip_index} has no embeddings") from None


def _normalize_rows(vectors: np.ndarray) -> np.ndarray:
    """Renormalize rows that drifted; reject zero rows.

    Rows already unit-norm within tolerance are kept byte-identical so that
    write -> load round trips are exact.
    """
    v64 = vectors.astype(np.float64)
    norms = np.linalg.norm(v64, axis=1)
    if bool((norms < ZERO_NORM_FLOOR).any()):
        bad = int(np.argmax(norms < ZERO_NORM_FLOOR))
        raise ZeroVectorError(f"frame row {bad} has (near-)zero norm")
    off = np.abs(norms - 1.0) > UNIT_NORM_TOL
    if bool(off.any()):
        vectors = vectors.copy()
        vectors[off] = (v64[off] / norms[off, None]).astype(np.float32)
    return vectors


def _grouped_order(clip_indices: np.ndarray, frame_indices: np.ndarray) -> np.ndarray:
    """Canonical store order: ascending clip index, then frame index."""
    return np.lexsort((frame_indices, clip_indices))


def _build_clip_map(clip_indices: np.ndarray) -> dict[int, tuple[int, int]]:
    clip_map: dict[int, tuple[int, int]] = {}
    start = 0
    n = len(clip_indices)
    for i in range(1, n + 1):
        if i == n or clip_indices[i] != clip_indices[start]:
            clip_map[int(clip_indices[start])] = (start, i)
            start = i
    return clip_map


# --- binary file format -------------------------------------------------------


def load_embedding_file(path: str | Path) -> EmbeddingStore:
    """Read a NAVQ binary embedding file into a validated store.

    Raises:
        BadMagicError: wrong or missing magic bytes.
        UnsupportedVersionError: unknown format version.
        TruncatedFileError: payload size disagrees with the header count.
        ZeroVectorError: a stored vector has (near-)zero norm.
        IoError: the file cannot be read.
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc

    if len(blob) < 4 or blob[:4] != MAGIC:
        raise BadMagicError(f"{path} is not a NAVQ embedding file")
    if len(blob) < _HEADER.size:
        raise TruncatedFileError(f"{path}: header cut short at {len(blob)} bytes")
    _, version, dim, count = _HEADER.unpack_from(blob)
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"format version {version} not supported")
    if dim == 0:
        raise DimMismatchError("header declares dim=0")
    if count == 0:
        raise TruncatedFileError("header declares zero records")

    record_dtype = np.dtype(
        [("clip", "<u4"), ("frame", "<u4"), ("vec", "<f4", (dim,))]
    )
    expected = _HEADER.size + count * record_dtype.itemsize
    if len(blob) != expected:
        raise TruncatedFileError(
            f"{path}: expected {expected} bytes for {count} records, got {len(blob)}"
        )
    records = np.frombuffer(blob, dtype=record_dtype, offset=_HEADER.size)
    return EmbeddingStore(
        records["vec"].copy(),
        records["clip"].copy(),
        records["frame"].copy(),
    )


def write_embedding_file(store: EmbeddingStore, path: str | Path) -> None:
    """Write a store to the NAVQ binary format (bit-exact round trip)."""
    path = Path(path)
    record_dtype = np.dtype(
        [("clip", "<u4"), ("frame", "<u4"), ("vec", "<f4", (store.dim,))]
    )
    records = np.empty(store.n_frames, dtype=record_dtype)
    records["clip"] = store.clip_indices
    records["frame"] = store.frame_indices
    records["vec"] = store.vectors
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, store.dim, store.n_frames)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(records.tobytes())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# --- clip manifest -------------------------------------------------------------


def load_clip_manifest(path: str | Path) -> list[ClipRecord]:
    """Read the JSONL clip manifest that accompanies an embedding file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc

    clips: list[ClipRecord] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
        clips.append(_clip_from_dict(obj, f"{path}:{lineno}"))
    return clips


def _clip_from_dict(obj: object, where: str) -> ClipRecord:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: clip entry must be an object")
    try:
        clip_index = obj["clip_index"]
        start_s = obj["start_s"]
        end_s = obj["end_s"]
        description = obj["description"]
    except KeyError as exc:
        raise SchemaError(f"{where}: missing field {exc}") from None
    if not isinstance(clip_index, int) or isinstance(clip_index, bool) or clip_index < 0:
        raise SchemaError(f"{where}: clip_index must be a non-negative integer")
    if not isinstance(description, str):
        raise SchemaError(f"{where}: description must be a string")
    try:
        start_s = float(start_s)
        end_s = float(end_s)
    except (TypeError, ValueError):
        raise SchemaError(f"{where}: start_s/end_s must be numbers") from None
    if end_s < start_s:
        raise SchemaError(f"{where}: end_s precedes start_s")
    return ClipRecord(clip_index, start_s, end_s, description)


def missing_clips(store: EmbeddingStore, clips: Sequence[ClipRecord]) -> list[int]:
    """Clip indices listed in a manifest but absent from the store."""
    return [c.clip_index for c in clips if c.clip_index not in store.clip_index_map]
