"""Narrative-aware evidence retrieval and evaluation for long-video QA.

The package splits into a scoring core (embedding store, narrative memory
bank, retrieval engine), a dataset layer (QA schema, distance bucketing,
validator/refiner pipeline), an evaluation harness (recall@k, judged
answer aggregation), and a model gateway with a deterministic offline
mock. The ``navqa`` CLI wires them together for batch use.
"""

from .embeddings import (
    ClipRecord,
    EmbeddingStore,
    FrameEmbedding,
    cosine,
    l2_normalize,
    load_clip_manifest,
    load_embedding_file,
    write_embedding_file,
)
from .errors import NavqaError
from .evaluation import (
    EvalReport,
    JudgedItem,
    JudgeScores,
    RunDelta,
    aggregate_report,
    compare_runs,
    judge_answer,
    recall_at_k,
    render_report_text,
)
from .gateway import (
    GatewayClient,
    GatewayRequest,
    GatewayResponse,
    parse_slot_response,
    send,
)
from .memory import (
    ExternalAssigner,
    HeuristicAssigner,
    MemoryBank,
    NarrativeSlot,
    assign_clip,
    build_memory,
    external_assign,
    heuristic_assign,
    load_bank,
    new_bank,
    save_bank,
)
from .qa import (
    DatasetStats,
    DistanceThresholds,
    PipelineStats,
    QAItem,
    ValidatorReport,
    bucket_distance,
    dataset_stats,
    filter_pipeline,
    load_qa,
    refine_item,
    validate_item,
)
from .retrieval import (
    RetrievalParams,
    RetrievalResult,
    ScoreBreakdown,
    clip_query_score,
    final_score,
    oracle_rank,
    retrieve,
    slot_score,
)

__version__ = "0.1.0"

__all__ = [
    "ClipRecord",
    "DatasetStats",
    "DistanceThresholds",
    "EmbeddingStore",
    "EvalReport",
    "ExternalAssigner",
    "FrameEmbedding",
    "GatewayClient",
    "GatewayRequest",
    "GatewayResponse",
    "HeuristicAssigner",
    "JudgeScores",
    "JudgedItem",
    "MemoryBank",
    "NarrativeSlot",
    "NavqaError",
    "PipelineStats",
    "QAItem",
    "RetrievalParams",
    "RetrievalResult",
    "RunDelta",
    "ScoreBreakdown",
    "ValidatorReport",
    "aggregate_report",
    "assign_clip",
    "bucket_distance",
    "build_memory",
    "clip_query_score",
    "compare_runs",
    "cosine",
    "dataset_stats",
    "external_assign",
    "filter_pipeline",
    "final_score",
    "heuristic_assign",
    "judge_answer",
    "l2_normalize",
    "load_bank",
    "load_clip_manifest",
    "load_embedding_file",
    "load_qa",
    "new_bank",
    "oracle_rank",
    "parse_slot_response",
    "recall_at_k",
    "refine_item",
    "render_report_text",
    "retrieve",
    "save_bank",
    "send",
    "slot_score",
    "validate_item",
    "write_embedding_file",
]
