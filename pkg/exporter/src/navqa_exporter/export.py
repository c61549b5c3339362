"""Export jobs: media in, NAVQ embedding files out."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoders import Encoder, make_encoder
from .errors import ConfigError
from .format import normalize_rows, write_navq
from .frames import sample_clip_frames
from .manifest import ManifestEntry, load_manifest


@dataclass(frozen=True)
class ExportJob:
    """One frame-export run over a clip manifest."""

    manifest: Path
    media_root: Path
    encoder: str
    out: Path
    fps: float = 1.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.fps) or self.fps <= 0:
            raise ConfigError(f"fps must be a positive number, got {self.fps}")


@dataclass(frozen=True)
class ExportSummary:
    """What a finished export wrote, for logs and CLI output."""

    out: Path
    n_clips: int
    n_frames: int
    dim: int
    frames_per_clip: dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "out": str(self.out),
            "n_clips": self.n_clips,
            "n_frames": self.n_frames,
            "dim": self.dim,
            "frames_per_clip": {
                str(k): v for k, v in sorted(self.frames_per_clip.items())
            },
        }


def _encode_clip(
    encoder: Encoder, entry: ManifestEntry, media_root: Path, fps: float
) -> np.ndarray:
    frames = sample_clip_frames(
        media_root / entry.media,
        start_s=entry.start_s,
        end_s=entry.end_s,
        fps=fps,
        media_start_s=entry.media_start_s,
    )
    return normalize_rows(encoder.encode_images(frames))


def export_frames(job: ExportJob) -> ExportSummary:
    """Embed every sampled frame of every manifest clip into one file.

    Records are written in ascending clip order with frame indices
    numbering the samples from zero, so a given corpus and encoder always
    produce the same bytes.
    """
    entries = load_manifest(job.manifest)
    encoder = make_encoder(job.encoder)

    per_clip: list[tuple[ManifestEntry, np.ndarray]] = []
    for entry in entries:
        vectors = _encode_clip(encoder, entry, job.media_root, job.fps)
        per_clip.append((entry, vectors))

    clip_indices: list[int] = []
    frame_indices: list[int] = []
    for entry, vectors in per_clip:
        clip_indices.extend([entry.clip_index] * len(vectors))
        frame_indices.extend(range(len(vectors)))
    stacked = np.concatenate([vectors for _, vectors in per_clip])

    write_navq(job.out, clip_indices, frame_indices, stacked)
    return ExportSummary(
        out=job.out,
        n_clips=len(entries),
        n_frames=int(stacked.shape[0]),
        dim=int(stacked.shape[1]),
        frames_per_clip={
            entry.clip_index: len(vectors) for entry, vectors in per_clip
        },
    )


def export_query(texts: list[str], encoder_config: str, out: Path) -> ExportSummary:
    """Embed query texts into a NAVQ file, one record per text.

    The record's clip index is the query's position in ``texts``; the
    frame index is always zero.
    """
    if not texts:
        raise ConfigError("no query texts to export")
    for i, text in enumerate(texts):
        if not isinstance(text, str) or not text.strip():
            raise ConfigError(f"query text {i} must be a nonempty string")

    encoder = make_encoder(encoder_config)
    vectors = normalize_rows(encoder.encode_texts(texts))
    write_navq(out, range(len(texts)), [0] * len(texts), vectors)
    return ExportSummary(
        out=out,
        n_clips=len(texts),
        n_frames=int(vectors.shape[0]),
        dim=int(vectors.shape[1]),
        frames_per_clip={i: 1 for i in range(len(texts))},
    )
