"""Fixtures that synthesize tiny videos for exporter tests.

Codecs vary by platform, so the builder tries mp4 first and falls back
to motion JPEG. Both are lossy; tests that read colors back must allow a
few counts of compression drift per channel.
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable, Sequence

import cv2
import numpy as np
import pytest

_CODECS = ((".mp4", "mp4v"), (".avi", "MJPG"))

VideoBuilder = Callable[..., Path]


@pytest.fixture
def make_video(tmp_path: Path) -> VideoBuilder:
    """Build a video with one solid-color frame per entry in ``colors``.

    Returns the written path; its suffix depends on the codec that worked.
    Colors are BGR tuples to match what the decoder hands back.
    """

    def _build(
        name: str,
        colors: Sequence[tuple[int, int, int]],
        fps: float = 4.0,
        size: tuple[int, int] = (64, 48),
    ) -> Path:
        for suffix, code in _CODECS:
            target = (tmp_path / name).with_suffix(suffix)
            writer = cv2.VideoWriter(
                str(target), cv2.VideoWriter_fourcc(*code), fps, size
            )
            if not writer.isOpened():
                writer.release()
                continue
            frame = np.empty((size[1], size[0], 3), dtype=np.uint8)
            for color in colors:
                frame[:] = color
                writer.write(frame)
            writer.release()
            return target
        raise RuntimeError("no working video codec (tried mp4v, MJPG)")

    return _build


@pytest.fixture
def make_solid_video(make_video: VideoBuilder) -> Callable[..., Path]:
    """Build a single-color video covering ``duration_s`` at ``fps``."""

    def _build(
        name: str,
        bgr: tuple[int, int, int],
        duration_s: float,
        fps: float = 4.0,
    ) -> Path:
        return make_video(name, [bgr] * round(duration_s * fps), fps=fps)

    return _build
