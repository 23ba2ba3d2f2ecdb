"""Batch export: record file in, binary embedding file out.

Reads the shared JSON-Lines record format, encodes every source text, and
writes the shared binary store layout (magic "KATE", version 1, header,
row-major float32 matrix, JSON trailer with ids and encoder_tag). Row i of
the output always belongs to record i of the input.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .encoder import EncoderSpec, ExporterError, SentenceEncoder

_HEADER = struct.Struct("<4sIQII")
_MAGIC = b"KATE"
_VERSION = 1


def read_records(path: str | Path) -> list[dict]:
    """Minimal reader for the shared record format (id + source needed)."""
    path = Path(path)
    if not path.exists():
        raise ExporterError(f"record file not found: {path}")
    records = []
    seen = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExporterError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            for key in ("id", "source"):
                if not isinstance(obj.get(key), str) or not obj[key]:
                    raise ExporterError(f"line {lineno}: missing or empty {key!r}")
            if obj["id"] in seen:
                raise ExporterError(f"line {lineno}: duplicate id {obj['id']!r}")
            seen.add(obj["id"])
            records.append(obj)
    return records


def write_store(
    matrix: np.ndarray, ids: list[str], encoder_tag: str, path: str | Path
) -> None:
    """Emit the binary store layout described in the module docstring."""
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    rows, dim = matrix.shape
    trailer = json.dumps({"ids": list(ids), "encoder_tag": encoder_tag}).encode(
        "utf-8"
    )
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, rows, dim, 0))
        fh.write(matrix.tobytes())
        fh.write(struct.pack("<Q", len(trailer)))
        fh.write(trailer)


def export(
    records_path: str | Path,
    spec: EncoderSpec,
    output_path: str | Path,
    batch_size: int = 32,
    encoder: SentenceEncoder | None = None,
) -> dict:
    """Encode every record source and write the embedding file.

    Returns a small stats dict. Pass a pre-loaded encoder to amortize
    checkpoint loading across calls; it must match the spec.
    """
    records = read_records(records_path)
    if encoder is None:
        encoder = SentenceEncoder(spec)
    elif encoder.spec != spec:
        raise ExporterError("provided encoder does not match the encoder spec")
    matrix = encoder.encode([r["source"] for r in records], batch_size=batch_size)
    write_store(matrix, [r["id"] for r in records], spec.encoder_tag, output_path)
    return {
        "records": len(records),
        "rows": int(matrix.shape[0]),
        "dim": int(matrix.shape[1]),
        "encoder_tag": spec.encoder_tag,
        "output": str(output_path),
    }
