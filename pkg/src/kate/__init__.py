"""Semantic retrieval of in-context examples for few-shot prompting.

Core pieces: a validated record + embedding store, exact nearest-neighbor
retrieval, prompt assembly under a token budget, a pluggable completion
backend, scoring metrics, and a config-driven experiment harness. A FastAPI
service wraps the harness; the CLI is a thin client of that service.
"""

from .baselines import (
    SelectionResult,
    knn_predict_generation,
    knn_predict_vote,
    random_select,
)
from .errors import BackendError, DataError, KateError, UnpromptableError
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    closest_farthest_study,
    ingest,
    load_config,
    recompute_report,
    run,
    run_sweep,
)
from .lm import CompletionParams, batch_complete, complete
from .metrics import (
    EvalOutcome,
    TrialSummary,
    accuracy,
    corpus_bleu,
    exact_match,
    normalize_answer,
    summarize,
)
from .prompts import (
    BpeCounter,
    PromptContext,
    PromptTemplate,
    WhitespaceCounter,
    count_tokens,
    default_template,
    load_template,
    render,
    totto_preprocess,
)
from .records import DatasetSplit, ExampleRecord, load_records, subsample, write_records
from .retriever import (
    NeighborList,
    OrderMode,
    apply_order,
    farthest_k,
    top_k,
    top_k_batch,
)
from .similarity import COSINE, NEG_EUCLIDEAN, cosine, neg_euclidean, scores
from .store import EmbeddingStore, load_embeddings, write_embeddings

__version__ = "0.1.0"

__all__ = [
    "BackendError",
    "BpeCounter",
    "COSINE",
    "CompletionParams",
    "DataError",
    "DatasetSplit",
    "EmbeddingStore",
    "EvalOutcome",
    "ExampleRecord",
    "ExperimentConfig",
    "ExperimentReport",
    "KateError",
    "NEG_EUCLIDEAN",
    "NeighborList",
    "OrderMode",
    "PromptContext",
    "PromptTemplate",
    "SelectionResult",
    "TrialSummary",
    "UnpromptableError",
    "WhitespaceCounter",
    "accuracy",
    "apply_order",
    "batch_complete",
    "closest_farthest_study",
    "complete",
    "corpus_bleu",
    "cosine",
    "count_tokens",
    "default_template",
    "exact_match",
    "farthest_k",
    "ingest",
    "knn_predict_generation",
    "knn_predict_vote",
    "load_config",
    "load_embeddings",
    "load_records",
    "load_template",
    "neg_euclidean",
    "normalize_answer",
    "random_select",
    "recompute_report",
    "render",
    "run",
    "run_sweep",
    "scores",
    "subsample",
    "summarize",
    "top_k",
    "top_k_batch",
    "totto_preprocess",
    "write_embeddings",
    "write_records",
]
