"""Writer for the NAVQ embedding file format.

Layout, all little-endian: magic ``NAVQ``, version u32, dim u32, count u64,
then ``count`` records of clip_index u32, frame_index u32, and dim float32
components. Consumers validate magic, version, counts, and row norms, so
this writer normalizes in float64 before the 32-bit downcast and refuses
to emit a file those checks would reject.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EncoderError, OutputError

MAGIC = b"NAVQ"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIIQ")
_U32_MAX = 2**32 - 1


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Unit-normalize rows in float64, then downcast to float32.

    Raises:
        EncoderError: non-finite values or a row with vanishing norm.
    """
    rows = np.asarray(matrix, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0 or rows.shape[1] == 0:
        raise EncoderError(f"expected a nonempty (n, dim) matrix, got {rows.shape}")
    if not np.all(np.isfinite(rows)):
        raise EncoderError("encoder produced non-finite values")
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms < 1e-12):
        raise EncoderError("encoder produced a zero vector")
    return (rows / norms[:, None]).astype(np.float32)


def write_navq(
    path: str | Path,
    clip_indices: Sequence[int],
    frame_indices: Sequence[int],
    vectors: np.ndarray,
) -> None:
    """Write one embedding file; rows must already be float32 unit vectors."""
    vectors = np.asarray(vectors, dtype=np.float32)
    count, dim = vectors.shape
    if count == 0 or dim == 0:
        raise OutputError("refusing to write an empty embedding file")
    if not (len(clip_indices) == len(frame_indices) == count):
        raise OutputError("index lists must match the vector count")
    for name, values in (("clip", clip_indices), ("frame", frame_indices)):
        for v in values:
            if not 0 <= int(v) <= _U32_MAX:
                raise OutputError(f"{name} index {v} does not fit in uint32")

    record = np.dtype([("clip", "<u4"), ("frame", "<u4"), ("vec", "<f4", (dim,))])
    body = np.empty(count, dtype=record)
    body["clip"] = np.asarray(clip_indices, dtype=np.uint32)
    body["frame"] = np.asarray(frame_indices, dtype=np.uint32)
    body["vec"] = vectors
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dim, count))
            fh.write(body.tobytes())
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
