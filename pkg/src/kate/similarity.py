"""Scalar similarity kernels between dense vectors.

Two kernels, both oriented so that a larger score means more similar:
negative Euclidean distance and cosine similarity. All arithmetic
accumulates in double precision regardless of input dtype, so rankings
over high-dimensional float32 rows are stable.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError

NEG_EUCLIDEAN = "neg_euclidean"
COSINE = "cosine"
METRICS = (NEG_EUCLIDEAN, COSINE)

# rows per block when scanning a matrix, keeps float64 temporaries small
_BLOCK_ROWS = 8192


def validate_metric(metric: str) -> str:
    if metric not in METRICS:
        raise DataError(f"unknown metric {metric!r}, expected one of {METRICS}")
    return metric


def _as_2d_f64_blocks(matrix: np.ndarray):
    for start in range(0, matrix.shape[0], _BLOCK_ROWS):
        yield start, matrix[start : start + _BLOCK_ROWS].astype(np.float64)


def squared_distances(query: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Exact float64 squared Euclidean distance from query to every row.

    Computed as sum((row - query)^2) per row, never via the expanded
    dot-product identity, so a row equal to the query scores exactly 0.
    """
    q = np.asarray(query, dtype=np.float64).ravel()
    if matrix.ndim != 2 or matrix.shape[1] != q.shape[0]:
        raise DataError(
            f"dimension mismatch: query has {q.shape[0]} dims, "
            f"matrix rows have {matrix.shape[-1]}"
        )
    out = np.empty(matrix.shape[0], dtype=np.float64)
    for start, block in _as_2d_f64_blocks(matrix):
        d = block - q
        out[start : start + block.shape[0]] = np.einsum("ij,ij->i", d, d)
    return out


def inner_products(query: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Exact float64 dot product of query with every row.

    Uses einsum rather than BLAS so the per-row summation order does not
    depend on the matrix shape; one-row and many-row calls agree bitwise.
    """
    q = np.asarray(query, dtype=np.float64).ravel()
    if matrix.ndim != 2 or matrix.shape[1] != q.shape[0]:
        raise DataError(
            f"dimension mismatch: query has {q.shape[0]} dims, "
            f"matrix rows have {matrix.shape[-1]}"
        )
    out = np.empty(matrix.shape[0], dtype=np.float64)
    for start, block in _as_2d_f64_blocks(matrix):
        out[start : start + block.shape[0]] = np.einsum("ij,j->i", block, q)
    return out


def row_norms(matrix: np.ndarray) -> np.ndarray:
    """Exact float64 Euclidean norm of every row."""
    out = np.empty(matrix.shape[0], dtype=np.float64)
    for start, block in _as_2d_f64_blocks(matrix):
        out[start : start + block.shape[0]] = np.sqrt(
            np.einsum("ij,ij->i", block, block)
        )
    return out


def scores(query: np.ndarray, matrix: np.ndarray, metric: str) -> np.ndarray:
    """Similarity of query against every matrix row, exact float64.

    This is the reference batched kernel: the scalar kernels below are
    one-row calls into it, so batched and scalar scores are identical bit
    for bit and rankings cannot diverge between the two.
    """
    validate_metric(metric)
    if metric == NEG_EUCLIDEAN:
        return -np.sqrt(squared_distances(query, matrix))
    q = np.asarray(query, dtype=np.float64).ravel()
    qn = float(row_norms(q[None, :])[0])
    if qn == 0.0:
        raise DataError("cosine similarity is undefined for a zero vector")
    dots = inner_products(query, matrix)
    norms = row_norms(matrix)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DataError(
            f"cosine similarity is undefined for zero vector at row {zero[0]}"
        )
    return dots / (qn * norms)


def neg_euclidean(u: np.ndarray, v: np.ndarray) -> float:
    """Negative Euclidean distance: 0 iff u == v, more negative when farther."""
    v = np.asarray(v, dtype=np.float64).ravel()
    return float(scores(u, v[None, :], NEG_EUCLIDEAN)[0])


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of the angle between u and v, in [-1, 1].

    Raises DataError when either vector is all zeros.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    return float(scores(u, v[None, :], COSINE)[0])
