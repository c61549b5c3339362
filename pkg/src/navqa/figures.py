"""Figure rendering for CLI reports.

Each report-producing subcommand can drop a PNG next to its output file;
these functions do that rendering. Everything uses the Agg backend so the
package works headless, and layouts are fixed so identical inputs produce
identical images.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import IoError
from .evaluation import EvalReport
from .prompts import JUDGE_DIMENSIONS
from .qa import DatasetStats
from .retrieval import RetrievalResult

_BUCKET_ORDER = ("short", "medium", "far")


def _ordered(keys) -> list[str]:
    known = [b for b in _BUCKET_ORDER if b in keys]
    return known + sorted(k for k in keys if k not in _BUCKET_ORDER)


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    try:
        fig.savefig(path, dpi=120, bbox_inches="tight")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def save_retrieval_figure(result: RetrievalResult, path: str | Path) -> Path:
    """Score decomposition over the ranked list: z, slot boost, and r."""
    ranks = np.arange(1, len(result.ranked) + 1)
    z = [b.z for b in result.ranked]
    r = [b.r for b in result.ranked]
    boost = [b.r - b.z for b in result.ranked]

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(ranks, r, marker="o", label="final score r")
    ax.plot(ranks, z, marker="s", label="clip relevance z")
    ax.bar(ranks, boost, width=0.6, alpha=0.3, label="slot boost")
    ax.set_xlabel("rank")
    ax.set_ylabel("score")
    ax.set_title(f"retrieval scores: {result.query_id}")
    ax.legend()
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def save_eval_figure(report: EvalReport, path: str | Path) -> Path:
    """Grouped bars of judge means per bucket, plus recall@k bars."""
    buckets = _ordered(report.cells)
    fig, (ax_scores, ax_recall) = plt.subplots(
        1, 2, figsize=(10, 4), gridspec_kw={"width_ratios": [3, 1]}
    )

    x = np.arange(len(buckets))
    width = 0.8 / len(JUDGE_DIMENSIONS)
    for i, name in enumerate(JUDGE_DIMENSIONS):
        values = [report.cells[b][name] for b in buckets]
        ax_scores.bar(x + i * width, values, width, label=name)
    ax_scores.set_xticks(x + width * (len(JUDGE_DIMENSIONS) - 1) / 2)
    ax_scores.set_xticklabels(buckets)
    ax_scores.set_ylim(0, 100)
    ax_scores.set_ylabel("mean score (0-100)")
    ax_scores.set_title("judge scores by distance bucket")
    ax_scores.legend(fontsize=8)

    recall_buckets = _ordered(report.recall)
    ax_recall.bar(
        np.arange(len(recall_buckets)),
        [report.recall[b] for b in recall_buckets],
        color="tab:green",
    )
    ax_recall.set_xticks(np.arange(len(recall_buckets)))
    ax_recall.set_xticklabels(recall_buckets)
    ax_recall.set_ylim(0, 1)
    ax_recall.set_title(f"recall@{report.k}")
    return _save(fig, path)


def save_recall_figure(recall_by_bucket: dict[str, float], k: int, path: str | Path) -> Path:
    """Recall@k per distance bucket as a single bar chart."""
    buckets = _ordered(recall_by_bucket)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(range(len(buckets)), [recall_by_bucket[b] for b in buckets], color="tab:blue")
    ax.set_xticks(range(len(buckets)))
    ax.set_xticklabels(buckets)
    ax.set_ylim(0, 1)
    ax.set_ylabel(f"recall@{k}")
    ax.set_title("retrieval recall by distance bucket")
    ax.grid(True, axis="y", alpha=0.3)
    return _save(fig, path)


def save_stats_figure(stats: DatasetStats, path: str | Path) -> Path:
    """Dataset composition: reasoning-type and distance distributions."""
    fig, (ax_rt, ax_dist) = plt.subplots(1, 2, figsize=(10, 4))

    reasoning = sorted(stats.per_reasoning.items())
    ax_rt.bar(range(len(reasoning)), [c for _, c in reasoning], color="tab:purple")
    ax_rt.set_xticks(range(len(reasoning)))
    ax_rt.set_xticklabels([n for n, _ in reasoning], rotation=45, ha="right")
    ax_rt.set_ylabel("items")
    ax_rt.set_title("reasoning types")

    buckets = _ordered(stats.per_distance)
    ax_dist.bar(
        range(len(buckets)),
        [stats.per_distance[b] for b in buckets],
        color="tab:orange",
    )
    ax_dist.set_xticks(range(len(buckets)))
    ax_dist.set_xticklabels(buckets)
    ax_dist.set_title("scene distance")

    fig.suptitle(
        f"{stats.total_items} items, {stats.total_evidences} evidence segments "
        f"(mean {stats.mean_evidences:.2f}/item)"
    )
    return _save(fig, path)
