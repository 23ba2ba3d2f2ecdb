"""Exact top-k / farthest-k neighbor selection over an embedding store.

Selection is exact with respect to the double-precision kernels in
``similarity``. Small stores are scanned directly in float64. Large stores
take a two-stage path: a float32 BLAS screening pass proposes candidates,
the candidates are rescored with the exact float64 kernel, and a rigorous
rounding-error bound proves no excluded row could outrank the selected
ones. When the proof fails (near ties at the boundary), the margin grows
and ultimately the scan falls back to the exact float64 pass, so results
never depend on which path ran.

Ties on equal scores always resolve to the smaller row index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .similarity import (
    NEG_EUCLIDEAN,
    inner_products,
    row_norms,
    squared_distances,
    validate_metric,
)
from .store import EmbeddingStore

# stores at or below this row count skip screening entirely
_EXACT_SCAN_ROWS = 4096
_SCREEN_CHUNK = 8192
_INITIAL_MARGIN = 64

_EPS32 = float(np.finfo(np.float32).eps) / 2  # unit roundoff 2**-24


@dataclass(frozen=True)
class OrderMode:
    """How a retrieved neighbor list is arranged in the prompt."""

    kind: str  # "default" | "reverse" | "shuffle"
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("default", "reverse", "shuffle"):
            raise DataError(f"unknown order mode {self.kind!r}")
        if self.kind == "shuffle" and self.seed is None:
            raise DataError("shuffle order requires a seed")

    @classmethod
    def parse(cls, text: str) -> "OrderMode":
        """Parse "default", "reverse" or "shuffle:SEED"."""
        if text in ("default", "reverse"):
            return cls(text)
        if text.startswith("shuffle:"):
            try:
                return cls("shuffle", int(text.split(":", 1)[1]))
            except ValueError:
                raise DataError(f"bad shuffle seed in {text!r}") from None
        raise DataError(f"unknown order mode {text!r}")

    def __str__(self) -> str:
        return self.kind if self.seed is None else f"{self.kind}:{self.seed}"


DEFAULT_ORDER = OrderMode("default")


@dataclass(frozen=True)
class NeighborList:
    """Ordered (row index, similarity score) pairs for one query."""

    entries: tuple[tuple[int, float], ...]
    metric: str
    order_mode: OrderMode = DEFAULT_ORDER

    @property
    def indices(self) -> list[int]:
        return [i for i, _ in self.entries]

    @property
    def scores(self) -> list[float]:
        return [s for _, s in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def _gamma(n: int) -> float:
    # first-order dot-product error bound constant for f32 accumulation
    g = n * _EPS32
    if g >= 0.5:
        return float("inf")
    return g / (1.0 - g)


def _order_by_key(key: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Sort candidate row indices by (key asc, index asc)."""
    order = np.lexsort((candidates, key))
    return candidates[order]


def _select_exact(key: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest keys, ties to the smaller index, sorted.

    Partial selection: partitions for the boundary value, then resolves
    boundary ties by index without ever sorting the whole array.
    """
    n = key.shape[0]
    if k >= n:
        return _order_by_key(key, np.arange(n))
    part = np.argpartition(key, k - 1)
    boundary = key[part[k - 1]]
    better = np.flatnonzero(key < boundary)
    ties = np.flatnonzero(key == boundary)
    need = k - better.shape[0]
    chosen = np.concatenate([better, ties[:need]])
    return _order_by_key(key[chosen], chosen)


def _exact_keys(query: np.ndarray, matrix: np.ndarray, metric: str) -> np.ndarray:
    """Exact float64 ranking keys, smaller = more similar."""
    if metric == NEG_EUCLIDEAN:
        return squared_distances(query, matrix)
    q64 = np.asarray(query, dtype=np.float64).ravel()
    qn = float(row_norms(q64[None, :])[0])
    if qn == 0.0:
        raise DataError("cosine similarity is undefined for a zero vector")
    dots = inner_products(query, matrix)
    norms = row_norms(matrix)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DataError(
            f"cosine similarity is undefined for zero vector at row {zero[0]}"
        )
    return -(dots / (qn * norms))


def _keys_to_scores(keys: np.ndarray, metric: str) -> np.ndarray:
    if metric == NEG_EUCLIDEAN:
        return -np.sqrt(keys)
    return -keys


def _screen(
    queries: np.ndarray, store: EmbeddingStore, metric: str
) -> tuple[np.ndarray, np.ndarray]:
    """Float32 ranking keys and a per-entry rounding-error bound.

    Returns (keys, err) of shape (rows, n_queries), float64, such that the
    exact key of row r for query j provably lies in keys[r, j] +/-
    err[r, j]. The bound is the standard sequential error model for float32
    dot products (BLAS blocked/FMA kernels round no worse) with the
    per-term sum |m_j * q_j| relaxed to ||m|| * ||q|| by Cauchy-Schwarz, so
    it costs only the cached row norms. Constants are inflated for safety;
    a loose bound merely escalates to the exact scan, never changes results.
    """
    matrix = store.matrix
    rows, dim = matrix.shape
    q32 = np.ascontiguousarray(queries, dtype=np.float32)
    q64 = q32.astype(np.float64)
    gamma = _gamma(dim)

    nn64 = store.row_sumsq()
    norms64 = np.sqrt(nn64)
    qq64 = np.einsum("ij,ij->i", q64, q64)
    qn64 = np.sqrt(qq64)
    keys = np.empty((rows, q32.shape[0]), dtype=np.float64)

    if metric == NEG_EUCLIDEAN:
        nn32 = nn64.astype(np.float32)
        qq32 = qq64.astype(np.float32)
        for start in range(0, rows, _SCREEN_CHUNK):
            chunk = matrix[start : start + _SCREEN_CHUNK]
            stop = start + chunk.shape[0]
            dot32 = chunk @ q32.T
            v32 = nn32[start:stop, None] - np.float32(2.0) * dot32 + qq32[None, :]
            keys[start:stop] = v32.astype(np.float64)
        nrnq = norms64[:, None] * qn64[None, :]
        err = 3.0 * gamma * nrnq + 4.0 * _EPS32 * (
            nn64[:, None] + 2.0 * nrnq + qq64[None, :]
        )
        return keys, err

    if (qn64 == 0.0).any():
        raise DataError("cosine similarity is undefined for a zero vector")
    zero = np.flatnonzero(norms64 == 0.0)
    if zero.size:
        raise DataError(
            f"cosine similarity is undefined for zero vector at row {zero[0]}"
        )
    norms32 = norms64.astype(np.float32)
    qn32 = qn64.astype(np.float32)
    for start in range(0, rows, _SCREEN_CHUNK):
        chunk = matrix[start : start + _SCREEN_CHUNK]
        stop = start + chunk.shape[0]
        dot32 = chunk @ q32.T
        s32 = dot32 / (norms32[start:stop, None] * qn32[None, :])
        keys[start:stop] = -s32.astype(np.float64)
    err = np.full_like(keys, 2.0 * gamma + 8.0 * _EPS32)
    return keys, err


def _select_screened(
    query: np.ndarray,
    store: EmbeddingStore,
    k: int,
    metric: str,
    keys32: np.ndarray,
    err: np.ndarray,
    farthest: bool,
) -> np.ndarray:
    """Resolve one query's exact selection from screening keys.

    Candidates come from the float32 keys with a growing margin; the
    float64 rescoring is accepted only when the error bound proves every
    excluded row strictly worse than the selected boundary.
    """
    rows = store.rows
    sign = -1.0 if farthest else 1.0
    proxy = sign * keys32
    margin = _INITIAL_MARGIN
    while k + margin < rows:
        m = k + margin
        cand = np.argpartition(proxy, m - 1)[:m]
        exact = sign * _exact_keys(query, store.matrix[cand], metric)
        # order candidates by (exact key, global row index) so ties resolve
        # the same way the full exact scan would
        chosen_local = np.lexsort((cand, exact))[:k]
        boundary = exact[chosen_local[-1]]
        excluded_lb = sign * keys32 - err
        excluded_lb[cand] = np.inf
        if excluded_lb.min() > boundary:
            return cand[chosen_local]
        margin *= 8
    keys = sign * _exact_keys(query, store.matrix, metric)
    return _select_exact(keys, k)


def _retrieve(
    query: np.ndarray,
    store: EmbeddingStore,
    k: int,
    metric: str,
    farthest: bool,
    screened: tuple[np.ndarray, np.ndarray] | None = None,
) -> NeighborList:
    validate_metric(metric)
    if store.rows == 0:
        raise DataError("cannot retrieve from an empty store")
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    q = np.asarray(query, dtype=np.float64).ravel()
    if q.shape[0] != store.dim:
        raise DataError(
            f"dimension mismatch: query has {q.shape[0]} dims, store has {store.dim}"
        )
    k_eff = min(k, store.rows)
    if store.rows <= _EXACT_SCAN_ROWS or k_eff + _INITIAL_MARGIN >= store.rows:
        keys = _exact_keys(q, store.matrix, metric)
        chosen = _select_exact(-keys if farthest else keys, k_eff)
        chosen_keys = keys[chosen]
    else:
        if screened is None:
            keys32, err = _screen(q[None, :], store, metric)
            keys32, err = keys32[:, 0], err[:, 0]
        else:
            keys32, err = screened
        chosen = _select_screened(q, store, k_eff, metric, keys32, err, farthest)
        chosen_keys = _exact_keys(q, store.matrix[chosen], metric)
    scores = _keys_to_scores(chosen_keys, metric)
    entries = tuple((int(i), float(s)) for i, s in zip(chosen, scores))
    return NeighborList(entries=entries, metric=metric)


def top_k(
    query: np.ndarray, store: EmbeddingStore, k: int, metric: str
) -> NeighborList:
    """The k most similar rows, most similar first.

    If k exceeds the store size, every row comes back, fully sorted.
    """
    return _retrieve(query, store, k, metric, farthest=False)


def farthest_k(
    query: np.ndarray, store: EmbeddingStore, k: int, metric: str
) -> NeighborList:
    """The k least similar rows, least similar first."""
    return _retrieve(query, store, k, metric, farthest=True)


def top_k_batch(
    queries: np.ndarray,
    store: EmbeddingStore,
    k: int,
    metric: str,
    farthest: bool = False,
) -> list[NeighborList]:
    """Selection for many queries, sharing one screening pass per chunk.

    Equivalent to calling top_k (or farthest_k) per row of ``queries``;
    batched screening only changes throughput, never results.
    """
    validate_metric(metric)
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim != 2:
        raise DataError("queries must be a 2-D array")
    if store.rows == 0:
        raise DataError("cannot retrieve from an empty store")
    out: list[NeighborList] = []
    k_eff = min(k, store.rows)
    use_screen = (
        store.rows > _EXACT_SCAN_ROWS and k_eff + _INITIAL_MARGIN < store.rows
    )
    block = 64
    for start in range(0, queries.shape[0], block):
        qb = queries[start : start + block]
        screened = _screen(qb, store, metric) if use_screen else None
        for j in range(qb.shape[0]):
            per_query = (
                (screened[0][:, j], screened[1][:, j]) if screened else None
            )
            out.append(
                _retrieve(qb[j], store, k, metric, farthest, screened=per_query)
            )
    return out


def apply_order(nl: NeighborList, mode: OrderMode) -> NeighborList:
    """Rearrange a default-ordered neighbor list for prompting.

    default is the identity, reverse flips the list, shuffle applies the
    deterministic PCG64 permutation for the given seed. The entry multiset
    never changes.
    """
    if mode.kind == "default":
        entries = nl.entries
    elif mode.kind == "reverse":
        entries = nl.entries[::-1]
    else:
        perm = np.random.default_rng(mode.seed).permutation(len(nl.entries))
        entries = tuple(nl.entries[i] for i in perm)
    return NeighborList(entries=entries, metric=nl.metric, order_mode=mode)
