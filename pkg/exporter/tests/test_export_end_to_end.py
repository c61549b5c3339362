"""Cross-package interoperability: exported files drive the retrieval toolkit.

These tests are the only exporter code that imports navqa. The exporter
itself talks to the toolkit purely through files: the embedding format,
the clip manifest, and the command line.
"""

import json
import struct
import subprocess
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest

import navqa
from navqa_exporter import ExportJob, export_frames, export_query

# Ten clips with integer durations; the red clip is the planted target.
DURATIONS = [3, 5, 2, 4, 6, 3, 2, 5, 4, 2]
COLORS = [
    (255, 0, 0),  # blue
    (0, 255, 0),  # green
    (255, 255, 0),  # cyan
    (255, 0, 255),  # magenta
    (0, 0, 255),  # red
    (0, 255, 255),  # yellow
    (255, 255, 255),  # white
    (128, 128, 128),  # gray
    (0, 128, 255),  # orange
    (128, 0, 128),  # purple
]
RED_CLIP = 4
QUERY = "the red clip"


@contextmanager
def criterion(capsys, number, label):
    start = time.perf_counter()
    status = "FAIL"
    try:
        yield
        status = "PASS"
    finally:
        elapsed = time.perf_counter() - start
        with capsys.disabled():
            print(f"criterion {number:>2} {status}: {label} ({elapsed:.2f}s)")


@pytest.fixture
def ten_clip_corpus(tmp_path, make_solid_video):
    rows = []
    start = 0
    for i, (duration, color) in enumerate(zip(DURATIONS, COLORS)):
        media = make_solid_video(f"clip_{i}", color, float(duration))
        rows.append(
            {
                "clip_index": i,
                "start_s": start,
                "end_s": start + duration,
                "description": f"solid color scene {i}",
                "media": media.name,
                "media_start_s": start,
            }
        )
        start += duration
    manifest = tmp_path / "clips.jsonl"
    manifest.write_text(
        "\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8"
    )
    return manifest, tmp_path


def _read_vectors(path):
    raw = path.read_bytes()
    header = struct.Struct("<4sIIQ")
    _, _, dim, count = header.unpack_from(raw)
    record = struct.Struct(f"<II{dim}f")
    rows = [
        record.unpack_from(raw, header.size + i * record.size)[2:]
        for i in range(count)
    ]
    return np.asarray(rows, dtype=np.float64)


def test_criterion_11_exported_files_drive_retrieval(ten_clip_corpus, tmp_path, capsys):
    with criterion(capsys, 11, "exported embeddings interoperate end to end"):
        manifest, media_root = ten_clip_corpus
        emb = tmp_path / "frames.bin"
        summary = export_frames(
            ExportJob(
                manifest=manifest,
                media_root=media_root,
                encoder="swatch",
                out=emb,
                fps=1.0,
            )
        )
        # one frame per second of clip
        assert summary.frames_per_clip == dict(enumerate(DURATIONS))
        assert summary.n_frames == sum(DURATIONS)

        store = navqa.load_embedding_file(emb)
        assert store.n_frames == sum(DURATIONS)
        for i, duration in enumerate(DURATIONS):
            assert int(np.sum(store.clip_indices == i)) == duration
        norms = np.linalg.norm(store.vectors.astype(np.float64), axis=1)
        assert np.abs(norms - 1.0).max() <= 1e-4
        # rows were already unit norm, so the loader kept the bytes
        assert np.array_equal(
            store.vectors, _read_vectors(emb).astype(np.float32)
        )

        qbin = tmp_path / "query.bin"
        export_query([QUERY], "swatch", qbin)
        qstore = navqa.load_embedding_file(qbin)
        assert qstore.n_frames == 1
        assert int(qstore.clip_indices[0]) == 0
        assert int(qstore.frame_indices[0]) == 0

        clips = navqa.load_clip_manifest(manifest)
        bank = navqa.build_memory(clips, store, navqa.HeuristicAssigner())
        result = navqa.retrieve(
            bank, store, qstore.vectors[0], navqa.RetrievalParams()
        )
        assert result.clip_sequence()[0] == RED_CLIP


def test_matched_pair_beats_mismatched_at_file_level(ten_clip_corpus, tmp_path):
    manifest, media_root = ten_clip_corpus
    emb = tmp_path / "frames.bin"
    export_frames(
        ExportJob(manifest=manifest, media_root=media_root, encoder="swatch", out=emb)
    )
    qbin = tmp_path / "query.bin"
    export_query([QUERY], "swatch", qbin)

    frames = _read_vectors(emb)
    query = _read_vectors(qbin)[0]
    store = navqa.load_embedding_file(emb)
    red = frames[store.clip_indices == RED_CLIP].mean(axis=0)
    blue = frames[store.clip_indices == 0].mean(axis=0)
    assert float(np.dot(query, red)) > float(np.dot(query, blue))


def test_cli_to_cli_pipeline(ten_clip_corpus, tmp_path):
    """The two command line tools compose with no shared Python state."""
    manifest, media_root = ten_clip_corpus
    emb = tmp_path / "frames.bin"
    qbin = tmp_path / "query.bin"
    bank = tmp_path / "bank.json"
    report = tmp_path / "report.json"

    def run(*argv):
        proc = subprocess.run(
            [sys.executable, "-m", *argv], capture_output=True, text=True
        )
        assert proc.returncode == 0, proc.stderr
        return proc

    run(
        "navqa_exporter.cli",
        "frames",
        "--manifest",
        str(manifest),
        "--media-root",
        str(media_root),
        "--encoder",
        "swatch",
        "--out",
        str(emb),
    )
    run("navqa_exporter.cli", "query", QUERY, "--out", str(qbin))
    run(
        "navqa.cli",
        "build-memory",
        "--clips",
        str(manifest),
        "--embeddings",
        str(emb),
        "--out",
        str(bank),
    )
    run(
        "navqa.cli",
        "retrieve",
        "--bank",
        str(bank),
        "--embeddings",
        str(emb),
        "--query-embedding",
        str(qbin),
        "--query-index",
        "0",
        "--out",
        str(report),
        "--no-figures",
    )
    ranked = json.loads(report.read_text(encoding="utf-8"))["ranked"]
    assert ranked[0]["clip_index"] == RED_CLIP
