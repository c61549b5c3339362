"""Command-line entry point wiring the pipeline end to end.

Subcommands: build-memory, retrieve, eval-retrieval, eval-answers,
validate-dataset, stats. Exit codes: 0 success, 1 usage error, 2 data
error, 3 gateway error. Reports go to --out (or stdout); subcommands that
write a report file also drop a PNG figure next to it unless --no-figures
is given. A --config JSON file overrides flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from .embeddings import load_clip_manifest, load_embedding_file, missing_clips
from .errors import (
    GatewayError,
    IoError,
    MalformedResponseError,
    NavqaError,
    PipelineError,
    SchemaError,
    UnknownClipError,
)
from .evaluation import (
    JudgedItem,
    aggregate_report,
    judge_answer,
    recall_at_k,
    render_report_text,
)
from .figures import (
    save_eval_figure,
    save_recall_figure,
    save_retrieval_figure,
    save_stats_figure,
)
from .gateway import ENDPOINT_ENV, GatewayClient
from .memory import (
    DEFAULT_N_SLOTS,
    DEFAULT_TAU,
    ExternalAssigner,
    HeuristicAssigner,
    bank_doc,
    build_memory,
    load_bank,
    save_bank,
)
from .qa import (
    DEFAULT_DISCARD_THRESHOLD,
    DistanceThresholds,
    bucket_distance,
    dataset_stats,
    distance_disagreements,
    filter_pipeline,
    load_qa,
    load_scene_map,
    map_evidence,
    save_qa,
)
from .retrieval import (
    DEFAULT_ALPHA,
    DEFAULT_LAMBDA,
    DEFAULT_TOP_K,
    RetrievalParams,
    retrieve,
)

log = logging.getLogger("navqa")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1, not 2."""

    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# Config-file keys -> argument dests they may override (first present wins).
_CONFIG_DESTS: dict[str, tuple[str, ...]] = {
    "manifest": ("clips",),
    "clips": ("clips",),
    "embeddings": ("embeddings",),
    "bank": ("bank",),
    "qa": ("qa",),
    "scene_map": ("scene_map",),
    "alpha": ("alpha",),
    "lambda": ("lam",),
    "lam": ("lam",),
    "top_k": ("top_k", "k"),
    "k": ("k", "top_k"),
    "n_slots": ("n_slots",),
    "slots": ("n_slots",),
    "tau": ("tau",),
    "short_max": ("short_max",),
    "medium_max": ("medium_max",),
    "discard_threshold": ("discard_threshold",),
    "endpoint": ("endpoint",),
    "seed": ("seed",),
}


def _apply_config(args: argparse.Namespace) -> None:
    """Overlay a --config JSON file onto parsed flags (config wins)."""
    config_path = getattr(args, "config", None)
    if not config_path:
        return
    try:
        text = Path(config_path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {config_path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{config_path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{config_path}: config must be a JSON object")

    flat: dict[str, object] = {}
    for key, value in doc.items():
        if key in ("paths", "params") and isinstance(value, dict):
            flat.update(value)
        else:
            flat[key] = value
    for key, value in flat.items():
        dests = _CONFIG_DESTS.get(key.replace("-", "_"))
        if dests is None:
            raise SchemaError(f"{config_path}: unknown config key {key!r}")
        for dest in dests:
            if hasattr(args, dest):
                setattr(args, dest, value)
                break


def _resolve_endpoint(args: argparse.Namespace) -> str:
    endpoint = getattr(args, "endpoint", None) or os.environ.get(ENDPOINT_ENV)
    if not endpoint and getattr(args, "seed", None) is not None:
        endpoint = f"mock:{args.seed}"
    if not endpoint:
        raise GatewayError(
            f"no endpoint: pass --endpoint, set {ENDPOINT_ENV}, or pass --seed "
            "to use the offline mock"
        )
    return endpoint


def _stamp(doc: dict[str, object], args: argparse.Namespace) -> dict[str, object]:
    if not getattr(args, "no_timestamp", False):
        doc["generated_at"] = datetime.now(timezone.utc).isoformat(
            timespec="seconds"
        )
    return doc


def _emit(text: str, out: str | None) -> None:
    if out:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write {out}: {exc}") from exc
        log.info("wrote %s", out)
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def _emit_json(doc: dict[str, object], out: str | None) -> None:
    _emit(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", out)


def _figure_path(args: argparse.Namespace) -> Path | None:
    if not getattr(args, "out", None) or not getattr(args, "figures", False):
        return None
    return Path(args.out).with_suffix(".png")


def _query_vector(qstore, ordinal: int):
    try:
        return qstore.clip_frame_set(ordinal)[0]
    except UnknownClipError:
        raise SchemaError(
            f"query file has no record with clip_index {ordinal}"
        ) from None


# --- subcommands ----------------------------------------------------------------


def _cmd_build_memory(args: argparse.Namespace) -> int:
    clips = load_clip_manifest(args.clips)
    store = load_embedding_file(args.embeddings)
    missing = missing_clips(store, clips)
    if missing:
        raise UnknownClipError(
            f"manifest clips without embeddings: {missing[:10]}"
            + ("..." if len(missing) > 10 else "")
        )
    if args.assigner == "heuristic":
        assigner = HeuristicAssigner(tau=args.tau)
    else:
        assigner = ExternalAssigner(GatewayClient(_resolve_endpoint(args)))
    bank = build_memory(clips, store, assigner, n_slots=args.n_slots)
    used = sum(1 for s in bank.slots if s.clip_indices)
    log.info("assigned %d clips into %d of %d slots", bank.n_assigned, used, bank.n_slots)
    if args.out:
        save_bank(bank, args.out)
        log.info("wrote %s", args.out)
    else:
        print(json.dumps(bank_doc(bank), indent=2, ensure_ascii=False))
    return 0


def _cmd_retrieve(args: argparse.Namespace) -> int:
    bank = load_bank(args.bank)
    store = load_embedding_file(args.embeddings)
    qstore = load_embedding_file(args.query_embedding)
    query = _query_vector(qstore, args.query_index)
    params = RetrievalParams(alpha=args.alpha, lam=args.lam, top_k=args.top_k)
    query_id = args.query_id or f"q{args.query_index}"
    result = retrieve(bank, store, query, params, query_id=query_id)
    _emit_json(_stamp(result.to_report(), args), args.out)
    figure = _figure_path(args)
    if figure is not None:
        save_retrieval_figure(result, figure)
        log.info("wrote %s", figure)
    return 0


def _cmd_eval_retrieval(args: argparse.Namespace) -> int:
    items = load_qa(args.qa)
    if not items:
        raise SchemaError(f"{args.qa}: dataset is empty")
    bank = load_bank(args.bank)
    store = load_embedding_file(args.embeddings)
    qstore = load_embedding_file(args.queries)
    scene_map = load_scene_map(args.scene_map) if args.scene_map else {}
    thresholds = DistanceThresholds(args.short_max, args.medium_max)
    params = RetrievalParams(alpha=args.alpha, lam=args.lam, top_k=args.k)

    recalls_by_bucket: dict[str, list[float]] = {}
    all_recalls: list[float] = []
    for i, item in enumerate(items):
        query = _query_vector(qstore, i)
        result = retrieve(bank, store, query, params, query_id=f"item{i}")
        gold = map_evidence(item, scene_map)
        value = recall_at_k(result.clip_sequence(), gold, args.k)
        label = (
            bucket_distance(item.evidence_events, thresholds)
            if args.recompute_distances
            else item.scene_distance
        )
        recalls_by_bucket.setdefault(label, []).append(value)
        all_recalls.append(value)

    per_bucket = {
        bucket: {
            "recall": sum(values) / len(values),
            "n": len(values),
        }
        for bucket, values in recalls_by_bucket.items()
    }
    doc: dict[str, object] = {
        "k": args.k,
        "n_items": len(items),
        "overall_recall": sum(all_recalls) / len(all_recalls),
        "per_bucket": dict(sorted(per_bucket.items())),
    }
    if args.format == "text":
        lines = [f"{'bucket':<8} {'n':>4} {'recall@' + str(args.k):>10}"]
        for bucket in ("short", "medium", "far"):
            if bucket in per_bucket:
                entry = per_bucket[bucket]
                lines.append(
                    f"{bucket:<8} {entry['n']:>4} {entry['recall']:>10.4f}"
                )
        lines.append(f"overall  {len(items):>4} {doc['overall_recall']:>10.4f}")
        _emit("\n".join(lines) + "\n", args.out)
    else:
        _emit_json(_stamp(doc, args), args.out)
    figure = _figure_path(args)
    if figure is not None:
        save_recall_figure(
            {b: e["recall"] for b, e in per_bucket.items()}, args.k, figure
        )
        log.info("wrote %s", figure)
    return 0


def _load_predictions(path: str, n_items: int) -> list[str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    entries: list[object] = []
    if text.lstrip().startswith("["):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(doc, list):
            raise SchemaError(f"{path}: expected a JSON array")
        entries = doc
    else:
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                entries.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
    predictions: list[str] = []
    for i, entry in enumerate(entries):
        if isinstance(entry, str):
            predictions.append(entry)
        elif isinstance(entry, dict) and isinstance(entry.get("predicted"), str):
            predictions.append(entry["predicted"])
        else:
            raise SchemaError(
                f"{path}: entry {i} must be a string or an object with 'predicted'"
            )
    if len(predictions) != n_items:
        raise SchemaError(
            f"{path}: {len(predictions)} predictions for {n_items} items"
        )
    return predictions


def _load_retrieved(path: str, n_items: int) -> list[tuple[int, ...]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    rankings: list[tuple[int, ...]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
        ranked = obj.get("ranked") if isinstance(obj, dict) else None
        if not isinstance(ranked, list) or not all(
            isinstance(c, int) and not isinstance(c, bool) for c in ranked
        ):
            raise SchemaError(
                f"{path}:{lineno}: expected an object with a 'ranked' integer list"
            )
        rankings.append(tuple(ranked))
    if len(rankings) != n_items:
        raise SchemaError(f"{path}: {len(rankings)} rankings for {n_items} items")
    return rankings


def _cmd_eval_answers(args: argparse.Namespace) -> int:
    items = load_qa(args.qa)
    if not items:
        raise SchemaError(f"{args.qa}: dataset is empty")
    predictions = _load_predictions(args.predictions, len(items))
    retrieved = (
        _load_retrieved(args.retrieved, len(items)) if args.retrieved else None
    )
    scene_map = load_scene_map(args.scene_map) if args.scene_map else None
    gateway = GatewayClient(_resolve_endpoint(args))

    judged: list[JudgedItem] = []
    for i, (item, predicted) in enumerate(zip(items, predictions)):
        scores = judge_answer(gateway, item.question, item.answer, predicted)
        judged.append(
            JudgedItem(
                item=item,
                scores=scores,
                retrieved=retrieved[i] if retrieved else None,
                gold=map_evidence(item, scene_map) if scene_map else None,
            )
        )
    report = aggregate_report(judged, k=args.k)
    if args.format == "text":
        _emit(render_report_text(report), args.out)
    else:
        _emit_json(_stamp(report.to_dict(), args), args.out)
    figure = _figure_path(args)
    if figure is not None:
        save_eval_figure(report, figure)
        log.info("wrote %s", figure)
    return 0


def _load_events(path: str) -> dict[str, list[str]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    events: dict[str, list[str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
        if not isinstance(obj, dict):
            raise SchemaError(f"{path}:{lineno}: entry must be an object")
        movie_id = obj.get("movie_id")
        movie_events = obj.get("events")
        if not isinstance(movie_id, str) or not movie_id:
            raise SchemaError(f"{path}:{lineno}: movie_id must be a nonempty string")
        if not isinstance(movie_events, list) or not all(
            isinstance(e, str) for e in movie_events
        ):
            raise SchemaError(f"{path}:{lineno}: events must be a list of strings")
        if movie_id in events:
            raise SchemaError(f"{path}:{lineno}: movie {movie_id!r} listed twice")
        events[movie_id] = movie_events
    return events


def _cmd_validate_dataset(args: argparse.Namespace) -> int:
    items = load_qa(args.qa)
    events = _load_events(args.events)
    gateway = GatewayClient(_resolve_endpoint(args))
    kept, stats = filter_pipeline(
        items, events, gateway, discard_threshold=args.discard_threshold
    )
    if args.kept_out:
        save_qa(kept, args.kept_out)
        log.info("wrote %s (%d items)", args.kept_out, len(kept))
    _emit_json(_stamp(stats.to_dict(), args), args.out)
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    items = load_qa(args.qa)
    stats = dataset_stats(items)
    doc = stats.to_dict()
    if args.recompute_distances:
        thresholds = DistanceThresholds(args.short_max, args.medium_max)
        disagreements = distance_disagreements(items, thresholds)
        doc["distance_disagreements"] = [
            {"position": i, "stored": stored, "recomputed": computed}
            for i, stored, computed in disagreements
        ]
    if args.format == "text":
        lines = [
            f"items            {stats.total_items}",
            f"evidence         {stats.total_evidences}",
            f"mean evidences   {stats.mean_evidences:.2f}",
        ]
        for group_name, group in (
            ("reasoning", stats.per_reasoning),
            ("distance", stats.per_distance),
            ("movie", stats.per_movie),
        ):
            for key in sorted(group):
                lines.append(f"{group_name:<9} {key:<20} {group[key]}")
        _emit("\n".join(lines) + "\n", args.out)
    else:
        _emit_json(_stamp(doc, args), args.out)
    figure = _figure_path(args)
    if figure is not None:
        save_stats_figure(stats, figure)
        log.info("wrote %s", figure)
    return 0


# --- parser ---------------------------------------------------------------------


def _add_common(parser: _Parser, *, figures: bool = False, fmt: bool = False):
    parser.add_argument("--config", help="JSON config file; its values override flags")
    parser.add_argument("--out", help="output file (default: stdout)")
    parser.add_argument(
        "--no-timestamp",
        action="store_true",
        help="omit the generated_at field for byte-reproducible reports",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    if figures:
        parser.add_argument(
            "--no-figures",
            dest="figures",
            action="store_false",
            help="skip the PNG figure written next to --out",
        )
        parser.set_defaults(figures=True)
    if fmt:
        parser.add_argument(
            "--format", choices=("json", "text"), default="json",
            help="report format (default: json)",
        )


def build_parser() -> _Parser:
    parser = _Parser(prog="navqa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build-memory", help="assign clips to narrative slots")
    p.add_argument("--clips", required=True, help="clip manifest (JSONL)")
    p.add_argument("--embeddings", required=True, help="frame embedding file")
    p.add_argument("--slots", dest="n_slots", type=int, default=DEFAULT_N_SLOTS)
    p.add_argument("--assigner", choices=("heuristic", "external"), default="heuristic")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--endpoint", help="model endpoint URL or mock:<seed>")
    p.add_argument("--seed", type=int, help="shorthand for --endpoint mock:<seed>")
    _add_common(p)
    p.set_defaults(handler=_cmd_build_memory)

    p = sub.add_parser("retrieve", help="rank clips for one query")
    p.add_argument("--bank", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--query-embedding", required=True, help="query embedding file")
    p.add_argument("--query-index", type=int, default=0)
    p.add_argument("--query-id")
    p.add_argument("--top-k", dest="top_k", type=int, default=DEFAULT_TOP_K)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    _add_common(p, figures=True)
    p.set_defaults(handler=_cmd_retrieve)

    p = sub.add_parser("eval-retrieval", help="recall@k against gold evidence")
    p.add_argument("--qa", required=True)
    p.add_argument("--bank", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--queries", required=True, help="one query record per item")
    p.add_argument("--scene-map", dest="scene_map")
    p.add_argument("--k", type=int, default=DEFAULT_TOP_K)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--short-max", dest="short_max", type=int, default=4)
    p.add_argument("--medium-max", dest="medium_max", type=int, default=15)
    p.add_argument("--recompute-distances", action="store_true")
    _add_common(p, figures=True, fmt=True)
    p.set_defaults(handler=_cmd_eval_retrieval)

    p = sub.add_parser("eval-answers", help="judge predictions and aggregate")
    p.add_argument("--qa", required=True)
    p.add_argument("--predictions", required=True, help="predicted answers, aligned")
    p.add_argument("--retrieved", help="per-item ranked clips (JSONL) for recall")
    p.add_argument("--scene-map", dest="scene_map")
    p.add_argument("--k", type=int, default=DEFAULT_TOP_K)
    p.add_argument("--endpoint")
    p.add_argument("--seed", type=int, help="shorthand for --endpoint mock:<seed>")
    _add_common(p, figures=True, fmt=True)
    p.set_defaults(handler=_cmd_eval_answers)

    p = sub.add_parser("validate-dataset", help="score, refine, or discard items")
    p.add_argument("--qa", required=True)
    p.add_argument("--events", required=True, help="per-movie event lists (JSONL)")
    p.add_argument(
        "--discard-threshold",
        dest="discard_threshold",
        type=int,
        default=DEFAULT_DISCARD_THRESHOLD,
    )
    p.add_argument("--kept-out", dest="kept_out", help="file for surviving items")
    p.add_argument("--endpoint")
    p.add_argument("--seed", type=int, help="shorthand for --endpoint mock:<seed>")
    _add_common(p)
    p.set_defaults(handler=_cmd_validate_dataset)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("--qa", required=True)
    p.add_argument("--short-max", dest="short_max", type=int, default=4)
    p.add_argument("--medium-max", dest="medium_max", type=int, default=15)
    p.add_argument("--recompute-distances", action="store_true")
    _add_common(p, figures=True, fmt=True)
    p.set_defaults(handler=_cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(message)s",
    )
    try:
        _apply_config(args)
        return args.handler(args)
    except PipelineError as exc:
        log.error("%s", exc)
        if isinstance(exc.__cause__, (GatewayError, MalformedResponseError)):
            return 3
        return 2
    except (GatewayError, MalformedResponseError) as exc:
        log.error("%s", exc)
        return 3
    except NavqaError as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
