from __future__ import annotations

import numpy as np
import pytest

from kate.errors import DataError
from kate.retriever import (
    NeighborList,
    OrderMode,
    apply_order,
    farthest_k,
    top_k,
    top_k_batch,
)
from kate.similarity import COSINE, METRICS, NEG_EUCLIDEAN, scores
from kate.store import EmbeddingStore

from conftest import make_store


def oracle_full_sort(query, store, k, metric, farthest=False):
    """Brute-force oracle: score every row, fully sort, slice k.

    Descending score with ascending index tie-break for top; ascending
    score for farthest. Independent of the selection code under test.
    """
    s = scores(np.asarray(query, dtype=np.float64), store.matrix, metric)
    key = s if farthest else -s
    order = np.lexsort((np.arange(store.rows), key))
    return order[: min(k, store.rows)].tolist()


def test_self_match_is_first():
    store = make_store(20, 6, seed=1)
    query = store.matrix[7]
    nl = top_k(query, store, 3, NEG_EUCLIDEAN)
    assert nl.entries[0] == (7, 0.0)


def test_k_equals_rows_full_sort():
    store = make_store(15, 4, seed=2)
    query = np.random.default_rng(3).standard_normal(4)
    nl = top_k(query, store, 15, NEG_EUCLIDEAN)
    assert nl.indices == oracle_full_sort(query, store, 15, NEG_EUCLIDEAN)
    assert len(nl) == 15


def test_k_larger_than_rows_returns_all():
    store = make_store(5, 3, seed=4)
    nl = top_k(np.ones(3), store, 99, COSINE)
    assert len(nl) == 5


def test_oracle_equivalence_small_stores():
    rng = np.random.default_rng(10)
    for trial in range(25):
        rows = int(rng.integers(1, 400))
        dim = int(rng.integers(1, 48))
        store = make_store(rows, dim, seed=trial + 100)
        query = rng.standard_normal(dim)
        for metric in METRICS:
            for k in (1, 7, 64):
                got = top_k(query, store, k, metric)
                assert got.indices == oracle_full_sort(query, store, k, metric)
                far = farthest_k(query, store, k, metric)
                assert far.indices == oracle_full_sort(
                    query, store, k, metric, farthest=True
                )


def test_oracle_equivalence_screened_path():
    # stores above the exact-scan threshold exercise the two-stage path
    rng = np.random.default_rng(55)
    for trial in range(3):
        store = make_store(5000, 32, seed=trial + 300)
        query = rng.standard_normal(32)
        for metric in METRICS:
            got = top_k(query, store, 10, metric)
            assert got.indices == oracle_full_sort(query, store, 10, metric)
            far = farthest_k(query, store, 10, metric)
            assert far.indices == oracle_full_sort(
                query, store, 10, metric, farthest=True
            )


def test_screened_path_with_duplicate_rows():
    # exact ties at the boundary must fall back and break ties by index
    rng = np.random.default_rng(77)
    base = rng.standard_normal((100, 16)).astype(np.float32)
    matrix = np.vstack([base] * 50)  # 5000 rows, every row duplicated 50x
    store = EmbeddingStore(
        matrix=matrix, ids=tuple(f"d{i}" for i in range(matrix.shape[0]))
    )
    query = rng.standard_normal(16)
    got = top_k(query, store, 64, NEG_EUCLIDEAN)
    assert got.indices == oracle_full_sort(query, store, 64, NEG_EUCLIDEAN)
    far = farthest_k(query, store, 64, NEG_EUCLIDEAN)
    assert far.indices == oracle_full_sort(
        query, store, 64, NEG_EUCLIDEAN, farthest=True
    )


def test_tie_break_smaller_index():
    matrix = np.array(
        [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]], dtype=np.float32
    )
    store = EmbeddingStore(matrix=matrix, ids=("a", "b", "c", "d"))
    nl = top_k(np.array([1.0, 0.0]), store, 4, NEG_EUCLIDEAN)
    assert nl.indices == [0, 2, 1, 3]


def test_batch_matches_single_queries():
    store = make_store(5000, 24, seed=9)
    queries = np.random.default_rng(12).standard_normal((20, 24))
    for metric in METRICS:
        batched = top_k_batch(queries, store, 8, metric)
        for i, nl in enumerate(batched):
            single = top_k(queries[i], store, 8, metric)
            assert nl.entries == single.entries


def test_monotone_scores_default_order():
    rng = np.random.default_rng(31)
    for trial in range(10):
        store = make_store(int(rng.integers(2, 200)), 8, seed=trial)
        query = rng.standard_normal(8)
        for metric in METRICS:
            nl = top_k(query, store, 10, metric)
            s = nl.scores
            assert all(a >= b for a, b in zip(s, s[1:]))
            far = farthest_k(query, store, 10, metric)
            fs = far.scores
            assert all(a <= b for a, b in zip(fs, fs[1:]))


def test_top_and_farthest_disjoint():
    rng = np.random.default_rng(41)
    store = make_store(100, 6, seed=8)
    query = rng.standard_normal(6)
    top = set(top_k(query, store, 30, NEG_EUCLIDEAN).indices)
    far = set(farthest_k(query, store, 30, NEG_EUCLIDEAN).indices)
    assert not top & far


def test_singleton_store():
    store = make_store(1, 4, seed=6)
    q = np.ones(4)
    assert top_k(q, store, 1, COSINE).indices == [0]
    assert farthest_k(q, store, 1, COSINE).indices == [0]


def test_errors():
    store = make_store(5, 3)
    with pytest.raises(DataError, match="dimension"):
        top_k(np.ones(4), store, 1, NEG_EUCLIDEAN)
    with pytest.raises(DataError, match="empty"):
        top_k(
            np.ones(3),
            EmbeddingStore(matrix=np.empty((0, 3), dtype=np.float32), ids=()),
            1,
            NEG_EUCLIDEAN,
        )
    with pytest.raises(DataError, match="k must be"):
        top_k(np.ones(3), store, 0, NEG_EUCLIDEAN)
    with pytest.raises(DataError, match="metric"):
        top_k(np.ones(3), store, 1, "manhattan")


class TestApplyOrder:
    def _nl(self) -> NeighborList:
        return NeighborList(
            entries=((3, 0.9), (1, 0.8), (4, 0.7)), metric=NEG_EUCLIDEAN
        )

    def test_default_is_identity(self):
        nl = NeighborList(entries=((3, 0.9), (1, 0.8)), metric=NEG_EUCLIDEAN)
        assert apply_order(nl, OrderMode("default")).entries == nl.entries

    def test_reverse_is_involution(self):
        nl = self._nl()
        twice = apply_order(
            apply_order(nl, OrderMode("reverse")), OrderMode("reverse")
        )
        assert twice.entries == nl.entries

    def test_shuffle_deterministic(self):
        nl = self._nl()
        a = apply_order(nl, OrderMode("shuffle", 123))
        b = apply_order(nl, OrderMode("shuffle", 123))
        assert a.entries == b.entries

    def test_multiset_preserved(self):
        nl = self._nl()
        for mode in (
            OrderMode("default"),
            OrderMode("reverse"),
            OrderMode("shuffle", 7),
        ):
            out = apply_order(nl, mode)
            assert sorted(out.entries) == sorted(nl.entries)

    def test_parse_round_trip(self):
        assert OrderMode.parse("default") == OrderMode("default")
        assert OrderMode.parse("reverse") == OrderMode("reverse")
        assert OrderMode.parse("shuffle:42") == OrderMode("shuffle", 42)
        assert str(OrderMode("shuffle", 42)) == "shuffle:42"
        with pytest.raises(DataError):
            OrderMode.parse("sorted")
        with pytest.raises(DataError):
            OrderMode.parse("shuffle:abc")
