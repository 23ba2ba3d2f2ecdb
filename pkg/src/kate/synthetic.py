"""Synthetic two-cluster dataset for desk-scale retrieval experiments.

Generates train and eval records whose embedding vectors are Gaussian
blobs around two separated centers. Each record's target is its cluster
word, so a cluster-aware mock backend can answer correctly exactly when
retrieval surfaces a same-cluster demonstration. Raising sigma makes the
clusters overlap, which degrades nearest-neighbor purity in a controlled
way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .records import ExampleRecord
from .retriever import top_k
from .similarity import NEG_EUCLIDEAN
from .store import EmbeddingStore

CLUSTER_WORDS = ("alpha", "beta")


@dataclass(frozen=True)
class ClusterDataset:
    train_records: tuple[ExampleRecord, ...]
    train_store: EmbeddingStore
    eval_records: tuple[ExampleRecord, ...]
    eval_store: EmbeddingStore
    labels_by_id: dict[str, str]

    @property
    def answers_by_id(self) -> dict[str, str]:
        return {r.id: r.target for r in self.eval_records}


def make_cluster_dataset(
    n_train_per_cluster: int = 500,
    n_eval: int = 100,
    dim: int = 16,
    sigma: float = 0.5,
    separation: float = 8.0,
    seed: int = 0,
) -> ClusterDataset:
    """Two Gaussian clusters at +/- separation/2 along the first axis.

    Eval points alternate between clusters. With the defaults the clusters
    are decisively separable; raise sigma to make neighbors cross over.
    """
    rng = np.random.default_rng(seed)
    centers = np.zeros((2, dim), dtype=np.float64)
    centers[0, 0] = -separation / 2
    centers[1, 0] = +separation / 2

    def sample(cluster: int, n: int) -> np.ndarray:
        return centers[cluster] + sigma * rng.standard_normal((n, dim))

    train_vecs = np.vstack(
        [sample(0, n_train_per_cluster), sample(1, n_train_per_cluster)]
    ).astype(np.float32)
    train_records = []
    for c in (0, 1):
        word = CLUSTER_WORDS[c]
        for i in range(n_train_per_cluster):
            train_records.append(
                ExampleRecord(
                    id=f"train-{word}-{i:05d}",
                    source=f"training point {i} of cluster {word}",
                    target=word,
                )
            )

    eval_clusters = [i % 2 for i in range(n_eval)]
    eval_vecs = np.vstack(
        [sample(c, 1) for c in eval_clusters]
    ).astype(np.float32)
    eval_records = []
    for i, c in enumerate(eval_clusters):
        word = CLUSTER_WORDS[c]
        eval_records.append(
            ExampleRecord(
                id=f"eval-{word}-{i:05d}",
                source=f"evaluation point {i} of cluster {word}",
                target=word,
            )
        )

    labels = {r.id: r.target for r in (*train_records, *eval_records)}
    return ClusterDataset(
        train_records=tuple(train_records),
        train_store=EmbeddingStore(
            matrix=train_vecs,
            ids=tuple(r.id for r in train_records),
            encoder_tag="synthetic-cluster",
        ),
        eval_records=tuple(eval_records),
        eval_store=EmbeddingStore(
            matrix=eval_vecs,
            ids=tuple(r.id for r in eval_records),
            encoder_tag="synthetic-cluster",
        ),
        labels_by_id=labels,
    )


def nearest_neighbor_cross_rate(dataset: ClusterDataset) -> float:
    """Fraction of eval points whose nearest train neighbor is cross-cluster."""
    crossed = 0
    for i, rec in enumerate(dataset.eval_records):
        nl = top_k(
            dataset.eval_store.matrix[i], dataset.train_store, 1, NEG_EUCLIDEAN
        )
        neighbor = dataset.train_records[nl.indices[0]]
        crossed += neighbor.target != rec.target
    return crossed / len(dataset.eval_records)
