"""Uniform frame sampling from clip media.

Sampling runs at a configured rate from the clip start inclusive: sample
``n`` sits at ``start_s + n / fps`` for ``n = 0, 1, ...`` while that time
stays below ``end_s``. Each sample time maps onto the source frame whose
interval covers it, i.e. ``floor((t - media_start_s) * media_fps)``.
"""

from __future__ import annotations

import math
from pathlib import Path

import cv2
import numpy as np

from .errors import MediaUnreadableError

# Guards float noise like 2.9999999996 * fps rounding below a frame start.
_TIME_EPS = 1e-9


def sample_count(start_s: float, end_s: float, fps: float) -> int:
    """How many samples a clip yields; at least one for positive duration."""
    return max(1, math.ceil((end_s - start_s) * fps - _TIME_EPS))


def sample_clip_frames(
    media_path: Path,
    *,
    start_s: float,
    end_s: float,
    fps: float,
    media_start_s: float = 0.0,
) -> list[np.ndarray]:
    """Decode the sampled frames of one clip, in sample order.

    Frames come back as BGR uint8 arrays straight from the decoder. The
    clip timeline is global; ``media_start_s`` states which global second
    the media file's first frame shows.
    """
    capture = cv2.VideoCapture(str(media_path))
    try:
        if not capture.isOpened():
            raise MediaUnreadableError(f"cannot open media file {media_path}")
        media_fps = capture.get(cv2.CAP_PROP_FPS)
        if not media_fps or media_fps <= 0:
            raise MediaUnreadableError(
                f"{media_path}: media reports no frame rate"
            )

        wanted: list[int] = []
        for n in range(sample_count(start_s, end_s, fps)):
            t = start_s + n / fps
            source = math.floor((t - media_start_s) * media_fps + _TIME_EPS)
            if source < 0:
                raise MediaUnreadableError(
                    f"{media_path}: clip begins before the media file "
                    f"(sample at {t:g}s, media starts at {media_start_s:g}s)"
                )
            wanted.append(source)

        # Sequential decode with a cursor; seeking is unreliable across codecs.
        frames: list[np.ndarray] = []
        cursor = 0
        frame = None
        for source in wanted:
            if source < cursor and frame is not None:
                frames.append(frame.copy())
                continue
            while cursor <= source:
                ok, frame = capture.read()
                if not ok or frame is None:
                    raise MediaUnreadableError(
                        f"{media_path}: ran out of frames at index {cursor} "
                        f"(clip spans {start_s:g}s to {end_s:g}s)"
                    )
                cursor += 1
            frames.append(frame.copy())
        return frames
    finally:
        capture.release()
