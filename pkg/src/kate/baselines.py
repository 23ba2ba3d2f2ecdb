"""Comparison selectors: random in-context selection and the pure kNN predictor.

The random baseline draws demonstrations uniformly without looking at
embeddings. The kNN predictor skips the language model entirely: for
generation it copies the top-1 neighbor's target, for classification it
majority-votes over the k nearest targets, breaking ties in favor of the
most similar example.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .records import ExampleRecord
from .retriever import top_k
from .similarity import NEG_EUCLIDEAN
from .store import EmbeddingStore


@dataclass(frozen=True)
class SelectionResult:
    """Records chosen for one prompt, already in prompt order."""

    chosen: tuple[ExampleRecord, ...]
    method_tag: str

    def __post_init__(self) -> None:
        ids = [r.id for r in self.chosen]
        if len(ids) != len(set(ids)):
            raise DataError("selection contains duplicate record ids")


def trial_seed(master_seed: int, trial: int, item: int) -> int:
    """Deterministic per-(trial, item) seed derived from one master seed.

    Splitting rule: a numpy SeedSequence keyed by the entropy list
    [master_seed, trial, item], so every (trial, item) cell gets an
    independent stream that is stable across machines.
    """
    return int(
        np.random.SeedSequence([master_seed, trial, item]).generate_state(1)[0]
    )


def random_select(
    pool: list[ExampleRecord], k: int, seed: int
) -> SelectionResult:
    """k distinct records drawn uniformly without replacement.

    Deterministic per seed. If k exceeds the pool, the whole pool comes
    back in shuffled order. Depends only on (pool order, k, seed), never on
    embeddings.
    """
    if not pool:
        raise DataError("cannot select from an empty pool")
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(pool))[: min(k, len(pool))]
    return SelectionResult(
        chosen=tuple(pool[i] for i in perm),
        method_tag=f"random({seed})",
    )


def knn_predict_generation(
    query: np.ndarray,
    store: EmbeddingStore,
    records: list[ExampleRecord],
    metric: str = NEG_EUCLIDEAN,
) -> str:
    """Copy the target of the single nearest neighbor."""
    _check_alignment(store, records)
    nl = top_k(query, store, k=1, metric=metric)
    return records[nl.indices[0]].target


def knn_predict_vote(
    query: np.ndarray,
    store: EmbeddingStore,
    records: list[ExampleRecord],
    k: int,
    metric: str = NEG_EUCLIDEAN,
) -> str:
    """Majority vote over the k nearest targets.

    A tied vote goes to the label whose tied example is most similar to the
    query; equal similarity falls back to the lexicographically smaller
    record id, so the prediction is independent of store row order.
    """
    _check_alignment(store, records)
    nl = top_k(query, store, k=k, metric=metric)
    counts: dict[str, int] = {}
    # best (score, id) witness per label, used only to settle tied votes
    best: dict[str, tuple[float, str]] = {}
    for idx, score in nl.entries:
        label = records[idx].target
        counts[label] = counts.get(label, 0) + 1
        witness = (-score, records[idx].id)
        if label not in best or witness < best[label]:
            best[label] = witness
    top_count = max(counts.values())
    tied = [label for label, c in counts.items() if c == top_count]
    return min(tied, key=lambda label: best[label])


def _check_alignment(store: EmbeddingStore, records: list[ExampleRecord]) -> None:
    if store.rows != len(records):
        raise DataError(
            f"store has {store.rows} rows but {len(records)} records given"
        )
