"""Clip manifest reader.

The manifest is JSON Lines, one clip per line, sharing the retrieval
toolkit's schema (clip_index, start_s, end_s, description). Two optional
keys drive media lookup here: ``media`` names the clip's video file
relative to the media root (default ``clip_<index:05d>.mp4``), and
``media_start_s`` states the timeline second at which that file begins
(default: the clip's own start, the file-per-clip convention).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestError


@dataclass(frozen=True)
class ManifestEntry:
    clip_index: int
    start_s: float
    end_s: float
    description: str
    media: str
    media_start_s: float


def _entry_from_dict(obj: object, where: str) -> ManifestEntry:
    if not isinstance(obj, dict):
        raise ManifestError(f"{where}: clip entry must be an object")
    try:
        clip_index = obj["clip_index"]
        start_s = float(obj["start_s"])
        end_s = float(obj["end_s"])
        description = obj["description"]
    except KeyError as exc:
        raise ManifestError(f"{where}: missing field {exc}") from None
    except (TypeError, ValueError):
        raise ManifestError(f"{where}: start_s/end_s must be numbers") from None
    if not isinstance(clip_index, int) or isinstance(clip_index, bool) or clip_index < 0:
        raise ManifestError(f"{where}: clip_index must be a non-negative integer")
    if not isinstance(description, str):
        raise ManifestError(f"{where}: description must be a string")
    if end_s <= start_s:
        raise ManifestError(f"{where}: clip needs positive duration")

    media = obj.get("media", f"clip_{clip_index:05d}.mp4")
    if not isinstance(media, str) or not media:
        raise ManifestError(f"{where}: media must be a nonempty string")
    media_start_s = obj.get("media_start_s", start_s if "media" not in obj else 0.0)
    try:
        media_start_s = float(media_start_s)
    except (TypeError, ValueError):
        raise ManifestError(f"{where}: media_start_s must be a number") from None
    return ManifestEntry(clip_index, start_s, end_s, description, media, media_start_s)


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    """Read and validate the manifest; clip indices must be unique."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read {path}: {exc}") from exc
    entries: list[ManifestEntry] = []
    seen: set[int] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
        entry = _entry_from_dict(obj, f"{path}:{lineno}")
        if entry.clip_index in seen:
            raise ManifestError(
                f"{path}:{lineno}: clip {entry.clip_index} listed twice"
            )
        seen.add(entry.clip_index)
        entries.append(entry)
    if not entries:
        raise ManifestError(f"{path}: manifest lists no clips")
    return sorted(entries, key=lambda e: e.clip_index)
