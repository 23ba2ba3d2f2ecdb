"""Row-aligned dense vector store and its on-disk binary format.

File layout (all little-endian):

    bytes 0-3   magic "KATE"
    u32         version (currently 1)
    u64         rows
    u32         dim
    u32         reserved (0)
    f32 x rows*dim   matrix, row-major
    u64         trailer byte length
    bytes       UTF-8 JSON trailer {"ids": [...], "encoder_tag": "..."}

The matrix region is memory-mapped on load, so large stores are scanned
without copying the file into RAM up front.
"""

from __future__ import annotations

import json
import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .records import ExampleRecord

MAGIC = b"KATE"
VERSION = 1
_HEADER = struct.Struct("<4sIQII")  # magic, version, rows, dim, reserved


@dataclass
class EmbeddingStore:
    """Immutable matrix of one vector per record, aligned by position.

    ``matrix`` is float32, shape (rows, dim); ``ids[i]`` names the record
    that produced row i. Safe for concurrent reads once constructed.
    """

    matrix: np.ndarray
    ids: tuple[str, ...]
    encoder_tag: str = ""
    _row_sumsq: np.ndarray | None = field(default=None, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self) -> None:
        # no copy when the input is already contiguous little-endian f32,
        # which keeps memory-mapped matrices memory-mapped
        m = np.ascontiguousarray(self.matrix, dtype=np.float32)
        if m.ndim != 2:
            raise DataError(f"matrix must be 2-D, got shape {m.shape}")
        if m.shape[0] != len(self.ids):
            raise DataError(
                f"{m.shape[0]} matrix rows but {len(self.ids)} manifest ids"
            )
        self.matrix = m
        self.ids = tuple(self.ids)
        bad = ~np.isfinite(m).all(axis=1)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DataError(f"non-finite value in row {row}")

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def row_sumsq(self) -> np.ndarray:
        """Per-row squared norms in float64, computed once and cached."""
        with self._lock:
            if self._row_sumsq is None:
                self._row_sumsq = np.einsum(
                    "ij,ij->i", self.matrix, self.matrix, dtype=np.float64
                )
            return self._row_sumsq

    def index_of(self, record_id: str) -> int:
        try:
            return self._id_index()[record_id]
        except KeyError:
            raise DataError(f"id {record_id!r} not in store manifest") from None

    def _id_index(self) -> dict[str, int]:
        with self._lock:
            idx = getattr(self, "_ids_by_name", None)
            if idx is None:
                idx = {rid: i for i, rid in enumerate(self.ids)}
                self._ids_by_name = idx
            return idx

    def take(self, indices: np.ndarray) -> "EmbeddingStore":
        """New store restricted to the given row indices, order preserved."""
        return EmbeddingStore(
            matrix=self.matrix[indices],
            ids=tuple(self.ids[i] for i in indices),
            encoder_tag=self.encoder_tag,
        )


def write_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    """Serialize a store to the binary format, bit-exactly round-trippable."""
    path = Path(path)
    trailer = json.dumps(
        {"ids": list(store.ids), "encoder_tag": store.encoder_tag}
    ).encode("utf-8")
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, store.rows, store.dim, 0))
        fh.write(np.ascontiguousarray(store.matrix, dtype="<f4").tobytes())
        fh.write(struct.pack("<Q", len(trailer)))
        fh.write(trailer)


def load_embeddings(
    path: str | Path, records: list[ExampleRecord] | None = None
) -> EmbeddingStore:
    """Load and validate an embedding file.

    When ``records`` is given, the manifest ids must match the records by
    position. The matrix is memory-mapped read-only; validation touches
    every value once (finiteness) without retaining a copy.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"embedding file not found: {path}")
    file_size = path.stat().st_size
    if file_size < _HEADER.size:
        raise DataError(f"{path}: file too short for header")
    with path.open("rb") as fh:
        magic, version, rows, dim, reserved = _HEADER.unpack(
            fh.read(_HEADER.size)
        )
        if magic != MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        if version != VERSION:
            raise DataError(f"{path}: unsupported version {version}")
        if dim <= 0:
            raise DataError(f"{path}: dim must be positive, got {dim}")
        matrix_bytes = rows * dim * 4
        trailer_len_off = _HEADER.size + matrix_bytes
        if file_size < trailer_len_off + 8:
            raise DataError(
                f"{path}: header declares {rows} rows x {dim} dims but the "
                f"file is too short to hold them"
            )
        fh.seek(trailer_len_off)
        (trailer_len,) = struct.unpack("<Q", fh.read(8))
        if file_size != trailer_len_off + 8 + trailer_len:
            raise DataError(f"{path}: trailer length does not match file size")
        fh.seek(trailer_len_off + 8)
        try:
            trailer = json.loads(fh.read(trailer_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DataError(f"{path}: malformed JSON trailer ({exc})") from None
    ids = trailer.get("ids")
    if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
        raise DataError(f"{path}: trailer ids must be a list of strings")
    if len(ids) != rows:
        raise DataError(
            f"{path}: {rows} rows but {len(ids)} ids in the manifest"
        )
    encoder_tag = trailer.get("encoder_tag", "")
    if rows == 0:
        matrix = np.empty((0, dim), dtype=np.float32)
    else:
        matrix = np.memmap(
            path, dtype="<f4", mode="r", offset=_HEADER.size, shape=(rows, dim)
        )
    if records is not None:
        if len(records) != rows:
            raise DataError(
                f"{path}: store has {rows} rows but {len(records)} records given"
            )
        for i, (rid, rec) in enumerate(zip(ids, records)):
            if rid != rec.id:
                raise DataError(
                    f"{path}: manifest id {rid!r} at row {i} does not match "
                    f"record id {rec.id!r}"
                )
    return EmbeddingStore(matrix=matrix, ids=tuple(ids), encoder_tag=encoder_tag)
