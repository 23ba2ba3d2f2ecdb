from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kate.errors import DataError
from kate.similarity import COSINE, NEG_EUCLIDEAN, cosine, neg_euclidean, scores


def oracle_neg_euclidean(u, v) -> float:
    """Naive double-precision scalar loop, independent of the kernels."""
    acc = math.fsum((float(a) - float(b)) ** 2 for a, b in zip(u, v))
    return -math.sqrt(acc)


def oracle_cosine(u, v) -> float:
    dot = math.fsum(float(a) * float(b) for a, b in zip(u, v))
    nu = math.sqrt(math.fsum(float(a) ** 2 for a in u))
    nv = math.sqrt(math.fsum(float(b) ** 2 for b in v))
    return dot / (nu * nv)


def test_neg_euclidean_identity():
    v = np.array([0.3, -1.7, 2.5], dtype=np.float32)
    assert neg_euclidean(v, v) == 0.0


def test_neg_euclidean_3_4_5():
    assert neg_euclidean(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == -5.0


def test_cosine_parallel():
    v = np.array([2.0, 0.0])
    assert cosine(v, v) == 1.0


def test_cosine_orthogonal():
    assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0


def test_cosine_45_degrees():
    got = cosine(np.array([1.0, 1.0]), np.array([1.0, 0.0]))
    assert got == pytest.approx(0.70710678, abs=1e-7)


def test_cosine_zero_vector_rejected():
    with pytest.raises(DataError, match="zero"):
        cosine(np.zeros(3), np.ones(3))
    with pytest.raises(DataError, match="zero"):
        cosine(np.ones(3), np.zeros(3))


def test_dimension_mismatch():
    with pytest.raises(DataError, match="dimension"):
        neg_euclidean(np.ones(3), np.ones(4))
    with pytest.raises(DataError, match="dimension"):
        cosine(np.ones(2), np.ones(5))


@pytest.mark.parametrize("dim", [8, 128, 1024, 4096])
def test_kernels_match_scalar_oracle(dim):
    rng = np.random.default_rng(dim)
    for _ in range(5):
        u = rng.standard_normal(dim).astype(np.float32)
        v = rng.standard_normal(dim).astype(np.float32)
        got = neg_euclidean(u, v)
        want = oracle_neg_euclidean(u, v)
        assert got == pytest.approx(want, rel=1e-5)
        got_c = cosine(u, v)
        want_c = oracle_cosine(u, v)
        assert got_c == pytest.approx(want_c, rel=1e-5)


def test_symmetry_random():
    rng = np.random.default_rng(11)
    for _ in range(50):
        dim = int(rng.integers(1, 64))
        u = rng.standard_normal(dim).astype(np.float32)
        v = rng.standard_normal(dim).astype(np.float32)
        assert neg_euclidean(u, v) == neg_euclidean(v, u)
        assert cosine(u, v) == cosine(v, u)


@given(
    st.lists(
        # float32 components: the kernels' real input domain, and their
        # squares stay comfortably inside float64 range
        st.floats(min_value=-100, max_value=100, allow_nan=False, width=32),
        min_size=1,
        max_size=32,
    ),
    st.floats(min_value=0.01, max_value=50),
    st.floats(min_value=0.01, max_value=50),
)
@settings(max_examples=200, deadline=None)
def test_cosine_scale_invariance(values, a, b):
    u = np.asarray(values, dtype=np.float64)
    if np.sqrt(u @ u) == 0.0:
        return
    v = u[::-1].copy()
    if np.sqrt(v @ v) == 0.0:
        return
    base = cosine(u, v)
    scaled = cosine(a * u, b * v)
    assert scaled == pytest.approx(base, abs=1e-6)


def test_neg_euclidean_zero_iff_equal_f32():
    rng = np.random.default_rng(3)
    u = rng.standard_normal(256).astype(np.float32)
    v = u.copy()
    assert neg_euclidean(u, v) == 0.0
    v[100] = np.float32(v[100] + 1e-3)
    assert neg_euclidean(u, v) < -1e-6


def test_batched_scores_equal_scalar_kernel():
    # bit-level agreement: batched rows and one-row scalar calls must rank
    # identically because they share the same computation
    rng = np.random.default_rng(21)
    matrix = rng.standard_normal((300, 64)).astype(np.float32)
    query = rng.standard_normal(64).astype(np.float32)
    for metric, scalar in (
        (NEG_EUCLIDEAN, neg_euclidean),
        (COSINE, cosine),
    ):
        batched = scores(query, matrix, metric)
        one_by_one = np.array([scalar(query, row) for row in matrix])
        assert np.array_equal(batched, one_by_one)
        assert np.array_equal(np.argsort(-batched), np.argsort(-one_by_one))


def test_scores_higher_means_more_similar():
    query = np.array([1.0, 0.0], dtype=np.float32)
    matrix = np.array([[1.0, 0.0], [0.5, 0.5], [-1.0, 0.0]], dtype=np.float32)
    for metric in (NEG_EUCLIDEAN, COSINE):
        s = scores(query, matrix, metric)
        assert s[0] > s[1] > s[2]
