"""Command line entry point for the embedding exporter.

Exit codes: 0 success, 1 usage error, 2 export failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ExporterError
from .export import ExportJob, export_frames, export_query


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # noqa: D102 - argparse hook
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="navqa-export",
        description="Export frame and query embeddings as NAVQ files.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    frames = commands.add_parser(
        "frames", help="embed sampled frames for every clip in a manifest"
    )
    frames.add_argument("--manifest", type=Path, required=True)
    frames.add_argument(
        "--media-root",
        type=Path,
        required=True,
        help="directory holding the media files named by the manifest",
    )
    frames.add_argument("--encoder", default="swatch")
    frames.add_argument("--fps", type=float, default=1.0)
    frames.add_argument("--out", type=Path, required=True)

    query = commands.add_parser("query", help="embed query texts")
    query.add_argument("texts", nargs="*", help="query texts to embed")
    query.add_argument(
        "--texts-file",
        type=Path,
        help="file with one query text per line, used when no texts are given",
    )
    query.add_argument("--encoder", default="swatch")
    query.add_argument("--out", type=Path, required=True)

    return parser


def _query_texts(args: argparse.Namespace, parser: argparse.ArgumentParser) -> list[str]:
    if args.texts:
        return list(args.texts)
    if args.texts_file is None:
        parser.exit(1, f"{parser.prog}: error: no query texts given\n")
    try:
        lines = args.texts_file.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        parser.exit(1, f"{parser.prog}: error: cannot read texts file: {exc}\n")
    return [line for line in lines if line.strip()]


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        if args.command == "frames":
            summary = export_frames(
                ExportJob(
                    manifest=args.manifest,
                    media_root=args.media_root,
                    encoder=args.encoder,
                    out=args.out,
                    fps=args.fps,
                )
            )
        else:
            summary = export_query(_query_texts(args, parser), args.encoder, args.out)
    except ExporterError as exc:
        print(f"navqa-export: {exc}", file=sys.stderr)
        return 2

    json.dump(summary.to_dict(), sys.stdout, indent=2)
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
