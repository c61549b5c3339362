"""Encoder backends mapping frames and query texts into one vector space.

Which encoder runs is pure configuration:

- ``swatch``: offline color-moment encoder. Images map to coarse color
  statistics; texts map color words onto the same statistics, so matched
  text/image pairs score higher cosine than mismatched ones. Good for
  fixtures and smoke tests, useless for real semantics.
- ``hash`` / ``hash:<dim>``: offline deterministic encoder; content bytes
  seed a pseudo-random unit vector. No cross-modal structure at all.
- ``http(s)://...``: a JSON-over-HTTP encoding service. POST
  ``{"texts": [...]}`` or ``{"images": [<base64 PNG>, ...]}``; the reply
  must be ``{"vectors": [[...], ...]}`` with one row per input.
"""

from __future__ import annotations

import base64
import hashlib
import random
import re
from typing import Protocol, Sequence

import cv2
import numpy as np
import requests

from .errors import ConfigError, EncoderError

_HASH_DEFAULT_DIM = 32

# Anchor colors for the swatch vocabulary, as RGB in [0, 1].
_COLOR_WORDS = {
    "red": (1.0, 0.0, 0.0),
    "green": (0.0, 1.0, 0.0),
    "blue": (0.0, 0.0, 1.0),
    "yellow": (1.0, 1.0, 0.0),
    "cyan": (0.0, 1.0, 1.0),
    "magenta": (1.0, 0.0, 1.0),
    "white": (1.0, 1.0, 1.0),
    "black": (0.0, 0.0, 0.0),
    "gray": (0.5, 0.5, 0.5),
    "grey": (0.5, 0.5, 0.5),
    "orange": (1.0, 0.5, 0.0),
    "purple": (0.5, 0.0, 0.5),
}


class Encoder(Protocol):
    """One embedding backend; both modalities land in the same space."""

    name: str
    dim: int

    def encode_images(self, frames: Sequence[np.ndarray]) -> np.ndarray: ...

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray: ...


def make_encoder(config: str) -> Encoder:
    """Build an encoder from its configuration string."""
    if not config:
        raise ConfigError("encoder configuration must be nonempty")
    if config.startswith(("http://", "https://")):
        return HttpEncoder(config)
    if config == "swatch":
        return SwatchEncoder()
    if config == "hash":
        return HashEncoder(_HASH_DEFAULT_DIM)
    if config.startswith("hash:"):
        try:
            dim = int(config[len("hash:"):])
        except ValueError:
            raise ConfigError(f"bad hash encoder dim in {config!r}") from None
        return HashEncoder(dim)
    raise ConfigError(f"unknown encoder {config!r}")


def _features_from_rgb(rgb: np.ndarray) -> np.ndarray:
    """Eight color moments; the shared space for both swatch modalities."""
    r, g, b = float(rgb[0]), float(rgb[1]), float(rgb[2])
    luma = 0.2126 * r + 0.7152 * g + 0.0722 * b
    return np.array(
        [r, g, b, luma, r - g, g - b, max(r, g, b) - min(r, g, b), 0.25],
        dtype=np.float64,
    )


class SwatchEncoder:
    """Color statistics as an embedding; toy but genuinely cross-modal."""

    name = "swatch"
    dim = 8

    def encode_images(self, frames: Sequence[np.ndarray]) -> np.ndarray:
        if not len(frames):
            raise EncoderError("no frames to encode")
        rows = np.empty((len(frames), self.dim), dtype=np.float64)
        for i, frame in enumerate(frames):
            pixels = np.asarray(frame, dtype=np.float64)
            if pixels.ndim != 3 or pixels.shape[2] != 3:
                raise EncoderError(f"frame {i}: expected an HxWx3 image")
            bgr = pixels.reshape(-1, 3).mean(axis=0) / 255.0
            rows[i] = _features_from_rgb(bgr[::-1])
        return rows

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray:
        if not len(texts):
            raise EncoderError("no texts to encode")
        rows = np.empty((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            words = re.findall(r"[a-z]+", text.lower())
            anchors = [_COLOR_WORDS[w] for w in words if w in _COLOR_WORDS]
            if not anchors:
                raise EncoderError(
                    f"text {i}: no color vocabulary in {text!r}; the swatch "
                    "encoder only understands colors"
                )
            rgb = np.mean(np.asarray(anchors, dtype=np.float64), axis=0)
            rows[i] = _features_from_rgb(rgb)
        return rows


class HashEncoder:
    """Content-addressed pseudo-random vectors; deterministic per input."""

    name = "hash"

    def __init__(self, dim: int):
        if dim < 1:
            raise ConfigError(f"hash encoder dim must be >= 1, got {dim}")
        self.dim = dim

    def _vector(self, tag: bytes, payload: bytes) -> np.ndarray:
        digest = hashlib.sha256(b"navqa-export\x00" + tag + b"\x00" + payload)
        rng = random.Random(int.from_bytes(digest.digest()[:16], "big"))
        return np.array([rng.gauss(0.0, 1.0) for _ in range(self.dim)])

    def encode_images(self, frames: Sequence[np.ndarray]) -> np.ndarray:
        if not len(frames):
            raise EncoderError("no frames to encode")
        rows = []
        for frame in frames:
            pixels = np.ascontiguousarray(frame, dtype=np.uint8)
            payload = repr(pixels.shape).encode() + pixels.tobytes()
            rows.append(self._vector(b"image", payload))
        return np.stack(rows)

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray:
        if not len(texts):
            raise EncoderError("no texts to encode")
        return np.stack(
            [self._vector(b"text", t.encode("utf-8")) for t in texts]
        )


class HttpEncoder:
    """Remote encoding service speaking a two-field JSON protocol."""

    name = "http"

    def __init__(self, endpoint: str, timeout_s: float = 60.0):
        self.endpoint = endpoint
        self.timeout_s = timeout_s
        self.dim = 0  # learned from the first reply

    def _call(self, body: dict) -> np.ndarray:
        try:
            reply = requests.post(self.endpoint, json=body, timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise EncoderError(f"encoder endpoint failed: {exc}") from exc
        if reply.status_code != 200:
            raise EncoderError(f"encoder endpoint returned HTTP {reply.status_code}")
        try:
            payload = reply.json()
        except ValueError as exc:
            raise EncoderError("encoder reply is not JSON") from exc
        vectors = payload.get("vectors") if isinstance(payload, dict) else None
        if not isinstance(vectors, list):
            raise EncoderError('encoder reply must carry a "vectors" list')
        try:
            rows = np.asarray(vectors, dtype=np.float64)
        except ValueError as exc:
            raise EncoderError(f"encoder vectors are ragged: {exc}") from exc
        n_inputs = len(body.get("texts", body.get("images", ())))
        if rows.ndim != 2 or rows.shape[0] != n_inputs:
            raise EncoderError(
                f"encoder returned {rows.shape} for {n_inputs} inputs"
            )
        if self.dim == 0:
            self.dim = int(rows.shape[1])
        elif rows.shape[1] != self.dim:
            raise EncoderError(
                f"encoder dim changed from {self.dim} to {rows.shape[1]}"
            )
        return rows

    def encode_images(self, frames: Sequence[np.ndarray]) -> np.ndarray:
        if not len(frames):
            raise EncoderError("no frames to encode")
        images = []
        for i, frame in enumerate(frames):
            ok, png = cv2.imencode(".png", np.asarray(frame, dtype=np.uint8))
            if not ok:
                raise EncoderError(f"frame {i}: PNG encoding failed")
            images.append(base64.b64encode(png.tobytes()).decode("ascii"))
        return self._call({"images": images})

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray:
        if not len(texts):
            raise EncoderError("no texts to encode")
        return self._call({"texts": list(texts)})
