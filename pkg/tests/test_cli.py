import json

import numpy as np
import pytest
import requests

from navqa.cli import main
from navqa.embeddings import EmbeddingStore, write_embedding_file
from navqa.memory import load_bank

from helpers import make_item, unit


@pytest.fixture()
def corpus(tmp_path):
    """Six-clip corpus on disk: embeddings, manifest, and one query file.

    The query vector duplicates clip 4's only frame, so clip 4 must rank
    first whenever the boost cannot reorder an exact match.
    """
    rng = np.random.default_rng(55)
    frames = []
    vectors = {}
    for c in range(6):
        anchor = unit(rng, 16)
        for f in range(2):
            # clip 4 repeats one frame so the planted query scores z = 1 on it
            v = anchor if c == 4 else unit(rng, 16)
            vectors[(c, f)] = v
            frames.append((c, f, v))
    store = EmbeddingStore.from_frames(frames)
    emb = tmp_path / "frames.bin"
    write_embedding_file(store, emb)

    manifest = tmp_path / "clips.jsonl"
    manifest.write_text(
        "\n".join(
            json.dumps(
                {
                    "clip_index": c,
                    "start_s": c * 30.0,
                    "end_s": (c + 1) * 30.0,
                    "description": f"scene {c}",
                }
            )
            for c in range(6)
        )
        + "\n",
        encoding="utf-8",
    )

    qstore = EmbeddingStore.from_frames([(0, 0, vectors[(4, 0)])])
    query = tmp_path / "query.bin"
    write_embedding_file(qstore, query)
    return {"dir": tmp_path, "embeddings": emb, "manifest": manifest, "query": query}


def _build_bank(corpus, name="bank.json", extra=()):
    bank_path = corpus["dir"] / name
    code = main(
        [
            "build-memory",
            "--clips", str(corpus["manifest"]),
            "--embeddings", str(corpus["embeddings"]),
            "--slots", "4",
            "--out", str(bank_path),
            *extra,
        ]
    )
    assert code == 0
    return bank_path


def test_build_memory_writes_bank(corpus):
    bank_path = _build_bank(corpus)
    bank = load_bank(bank_path)
    assert bank.n_slots == 4
    assert bank.n_assigned == 6
    doc = json.loads(bank_path.read_text(encoding="utf-8"))
    assert doc["version"] == 1
    assert doc["assigner"] == "heuristic"


def test_build_memory_stdout(corpus, capsys):
    code = main(
        [
            "build-memory",
            "--clips", str(corpus["manifest"]),
            "--embeddings", str(corpus["embeddings"]),
            "--slots", "4",
        ]
    )
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["n_slots"] == 4


def test_build_memory_external_mock(corpus):
    bank_path = _build_bank(
        corpus, name="bank_ext.json", extra=["--assigner", "external", "--seed", "3"]
    )
    bank = load_bank(bank_path)
    assert bank.assigner_kind == "external"
    assert bank.n_assigned == 6


def test_retrieve_writes_report_and_figure(corpus):
    bank_path = _build_bank(corpus)
    out = corpus["dir"] / "rank.json"
    code = main(
        [
            "retrieve",
            "--bank", str(bank_path),
            "--embeddings", str(corpus["embeddings"]),
            "--query-embedding", str(corpus["query"]),
            "--top-k", "3",
            "--out", str(out),
        ]
    )
    assert code == 0
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["query_id"] == "q0"
    assert set(doc["params"]) == {"alpha", "lambda", "top_k"}
    assert len(doc["ranked"]) == 3
    assert doc["ranked"][0]["clip_index"] == 4
    assert "generated_at" in doc
    assert (corpus["dir"] / "rank.png").exists()


def test_retrieve_no_figures(corpus):
    bank_path = _build_bank(corpus)
    out = corpus["dir"] / "plain.json"
    code = main(
        [
            "retrieve",
            "--bank", str(bank_path),
            "--embeddings", str(corpus["embeddings"]),
            "--query-embedding", str(corpus["query"]),
            "--out", str(out),
            "--no-figures",
        ]
    )
    assert code == 0
    assert not (corpus["dir"] / "plain.png").exists()


def test_retrieve_no_timestamp_is_byte_reproducible(corpus):
    bank_path = _build_bank(corpus)
    outputs = []
    for name in ("a.json", "b.json"):
        out = corpus["dir"] / name
        code = main(
            [
                "retrieve",
                "--bank", str(bank_path),
                "--embeddings", str(corpus["embeddings"]),
                "--query-embedding", str(corpus["query"]),
                "--out", str(out),
                "--no-timestamp",
                "--no-figures",
            ]
        )
        assert code == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    assert b"generated_at" not in outputs[0]


def test_config_overrides_flags(corpus):
    bank_path = _build_bank(corpus)
    config = corpus["dir"] / "run.json"
    config.write_text(
        json.dumps({"params": {"alpha": 1.0, "lambda": 0.0, "top_k": 2}}),
        encoding="utf-8",
    )
    out = corpus["dir"] / "configured.json"
    code = main(
        [
            "retrieve",
            "--bank", str(bank_path),
            "--embeddings", str(corpus["embeddings"]),
            "--query-embedding", str(corpus["query"]),
            "--alpha", "0.25",
            "--config", str(config),
            "--out", str(out),
            "--no-figures",
        ]
    )
    assert code == 0
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["params"]["alpha"] == 1.0
    assert doc["params"]["lambda"] == 0.0
    assert len(doc["ranked"]) == 2


def test_config_rejects_unknown_keys(corpus):
    bank_path = _build_bank(corpus)
    config = corpus["dir"] / "bad.json"
    config.write_text('{"verbosity": 3}', encoding="utf-8")
    code = main(
        [
            "retrieve",
            "--bank", str(bank_path),
            "--embeddings", str(corpus["embeddings"]),
            "--query-embedding", str(corpus["query"]),
            "--config", str(config),
        ]
    )
    assert code == 2


def test_usage_errors_exit_1(capsys):
    assert main([]) == 1
    assert main(["retrieve"]) == 1
    assert main(["no-such-command"]) == 1
    assert "error" in capsys.readouterr().err


def test_missing_input_exits_2(corpus):
    code = main(
        [
            "retrieve",
            "--bank", str(corpus["dir"] / "absent.json"),
            "--embeddings", str(corpus["embeddings"]),
            "--query-embedding", str(corpus["query"]),
        ]
    )
    assert code == 2


def test_bad_query_index_exits_2(corpus):
    bank_path = _build_bank(corpus)
    code = main(
        [
            "retrieve",
            "--bank", str(bank_path),
            "--embeddings", str(corpus["embeddings"]),
            "--query-embedding", str(corpus["query"]),
            "--query-index", "5",
        ]
    )
    assert code == 2


def _write_qa(path, items):
    path.write_text(
        "\n".join(json.dumps(i.to_dict()) for i in items) + "\n", encoding="utf-8"
    )


def test_eval_retrieval_flow(corpus):
    bank_path = _build_bank(corpus)
    items = [
        make_item(evidence_events=[0, 3], movie_id="mv-a", scene_distance="short"),
        make_item(evidence_events=[1, 5], movie_id="mv-a", scene_distance="medium"),
    ]
    qa = corpus["dir"] / "qa.jsonl"
    _write_qa(qa, items)

    rng = np.random.default_rng(56)
    qstore = EmbeddingStore.from_frames(
        [(0, 0, unit(rng, 16)), (1, 0, unit(rng, 16))]
    )
    queries = corpus["dir"] / "queries.bin"
    write_embedding_file(qstore, queries)

    out = corpus["dir"] / "recall.json"
    code = main(
        [
            "eval-retrieval",
            "--qa", str(qa),
            "--bank", str(bank_path),
            "--embeddings", str(corpus["embeddings"]),
            "--queries", str(queries),
            "--k", "6",
            "--out", str(out),
        ]
    )
    assert code == 0
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["k"] == 6
    assert doc["n_items"] == 2
    assert doc["overall_recall"] == 1.0
    assert doc["per_bucket"]["short"] == {"recall": 1.0, "n": 1}
    assert (corpus["dir"] / "recall.png").exists()

    text_out = corpus["dir"] / "recall.txt"
    code = main(
        [
            "eval-retrieval",
            "--qa", str(qa),
            "--bank", str(bank_path),
            "--embeddings", str(corpus["embeddings"]),
            "--queries", str(queries),
            "--k", "6",
            "--format", "text",
            "--out", str(text_out),
            "--no-figures",
        ]
    )
    assert code == 0
    text = text_out.read_text(encoding="utf-8")
    assert "recall@6" in text
    assert "overall" in text


def test_eval_answers_flow(corpus):
    items = [
        make_item(movie_id="mv-a"),
        make_item(
            movie_id="mv-a",
            scene_distance="far",
            evidence_events=[1, 30],
            reasoning_type="narrative",
        ),
    ]
    qa = corpus["dir"] / "qa.jsonl"
    _write_qa(qa, items)
    predictions = corpus["dir"] / "pred.jsonl"
    predictions.write_text(
        "\n".join(json.dumps({"predicted": i.answer}) for i in items) + "\n",
        encoding="utf-8",
    )
    retrieved = corpus["dir"] / "retrieved.jsonl"
    retrieved.write_text(
        json.dumps({"ranked": [2, 9, 14]}) + "\n" + json.dumps({"ranked": [1, 30]}) + "\n",
        encoding="utf-8",
    )
    out = corpus["dir"] / "eval.json"
    code = main(
        [
            "eval-answers",
            "--qa", str(qa),
            "--predictions", str(predictions),
            "--retrieved", str(retrieved),
            "--k", "5",
            "--seed", "8",
            "--out", str(out),
        ]
    )
    assert code == 0
    doc = json.loads(out.read_text(encoding="utf-8"))
    # identical answers get full marks from the offline mock
    assert doc["overall"] == 100.0
    assert doc["cells"]["medium"]["depth"] == 100.0
    assert doc["recall"]["medium"] == 1.0
    assert doc["recall"]["far"] == 1.0
    assert (corpus["dir"] / "eval.png").exists()

    text_out = corpus["dir"] / "eval.txt"
    code = main(
        [
            "eval-answers",
            "--qa", str(qa),
            "--predictions", str(predictions),
            "--k", "5",
            "--seed", "8",
            "--format", "text",
            "--out", str(text_out),
            "--no-figures",
        ]
    )
    assert code == 0
    assert "100.00" in text_out.read_text(encoding="utf-8")


def test_eval_answers_prediction_count_mismatch(corpus):
    qa = corpus["dir"] / "qa.jsonl"
    _write_qa(qa, [make_item()])
    predictions = corpus["dir"] / "pred.json"
    predictions.write_text('["a", "b"]', encoding="utf-8")
    code = main(
        [
            "eval-answers",
            "--qa", str(qa),
            "--predictions", str(predictions),
            "--seed", "8",
        ]
    )
    assert code == 2


def test_eval_answers_gateway_failure_exits_3(corpus, monkeypatch):
    qa = corpus["dir"] / "qa.jsonl"
    _write_qa(qa, [make_item()])
    predictions = corpus["dir"] / "pred.json"
    predictions.write_text('["an answer"]', encoding="utf-8")

    def refuse(*args, **kwargs):
        raise requests.ConnectionError("refused")

    monkeypatch.setattr(requests, "post", refuse)
    monkeypatch.setattr("time.sleep", lambda s: None)
    code = main(
        [
            "eval-answers",
            "--qa", str(qa),
            "--predictions", str(predictions),
            "--endpoint", "http://gw.invalid/v1",
        ]
    )
    assert code == 3


def test_validate_dataset_flow(corpus):
    items = [make_item(movie_id=f"mv-{i}", question=f"Why does scene {i} end?") for i in range(4)]
    qa = corpus["dir"] / "qa.jsonl"
    _write_qa(qa, items)
    events = corpus["dir"] / "events.jsonl"
    events.write_text(
        "\n".join(
            json.dumps({"movie_id": f"mv-{i}", "events": ["a door opens", "a door closes"]})
            for i in range(4)
        )
        + "\n",
        encoding="utf-8",
    )
    out = corpus["dir"] / "pipeline.json"
    kept_out = corpus["dir"] / "kept.jsonl"
    code = main(
        [
            "validate-dataset",
            "--qa", str(qa),
            "--events", str(events),
            "--seed", "21",
            "--out", str(out),
            "--kept-out", str(kept_out),
        ]
    )
    assert code == 0
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["n_input"] == 4
    assert doc["n_kept"] + doc["n_discarded"] == 4
    kept_lines = [l for l in kept_out.read_text(encoding="utf-8").splitlines() if l]
    assert len(kept_lines) == doc["n_kept"]


def test_validate_dataset_gateway_failure_exits_3(corpus, monkeypatch):
    qa = corpus["dir"] / "qa.jsonl"
    _write_qa(qa, [make_item(movie_id="mv-a")])
    events = corpus["dir"] / "events.jsonl"
    events.write_text(
        json.dumps({"movie_id": "mv-a", "events": ["a door opens"]}) + "\n",
        encoding="utf-8",
    )

    def refuse(*args, **kwargs):
        raise requests.ConnectionError("refused")

    monkeypatch.setattr(requests, "post", refuse)
    monkeypatch.setattr("time.sleep", lambda s: None)
    code = main(
        [
            "validate-dataset",
            "--qa", str(qa),
            "--events", str(events),
            "--endpoint", "http://gw.invalid/v1",
        ]
    )
    assert code == 3


def test_validate_dataset_missing_events_exits_2(corpus):
    qa = corpus["dir"] / "qa.jsonl"
    _write_qa(qa, [make_item(movie_id="mv-a")])
    events = corpus["dir"] / "events.jsonl"
    events.write_text(
        json.dumps({"movie_id": "mv-other", "events": ["x"]}) + "\n", encoding="utf-8"
    )
    code = main(
        [
            "validate-dataset",
            "--qa", str(qa),
            "--events", str(events),
            "--seed", "21",
        ]
    )
    assert code == 2


def test_stats_flow(corpus):
    items = [
        make_item(evidence_events=[1, 2], scene_distance="far"),
        make_item(evidence_events=[1, 9]),
    ]
    qa = corpus["dir"] / "qa.jsonl"
    _write_qa(qa, items)
    out = corpus["dir"] / "stats.json"
    code = main(
        [
            "stats",
            "--qa", str(qa),
            "--recompute-distances",
            "--out", str(out),
        ]
    )
    assert code == 0
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["total_items"] == 2
    assert doc["total_evidences"] == 4
    assert doc["distance_disagreements"] == [
        {"position": 0, "stored": "far", "recomputed": "short"}
    ]
    assert (corpus["dir"] / "stats.png").exists()

    code = main(["stats", "--qa", str(qa), "--format", "text", "--no-timestamp"])
    assert code == 0


def test_stats_text_output(corpus, capsys):
    qa = corpus["dir"] / "qa.jsonl"
    _write_qa(qa, [make_item()])
    code = main(["stats", "--qa", str(qa), "--format", "text"])
    assert code == 0
    text = capsys.readouterr().out
    assert "items" in text
    assert "mean evidences" in text
