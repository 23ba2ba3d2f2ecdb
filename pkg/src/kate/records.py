"""Example records and the JSON-Lines file format they live in.

A record is one (source, target) training or evaluation instance. Files are
UTF-8 JSON-Lines, one object per line with keys ``id``, ``source``,
``target`` and optional ``targets_alt`` (extra gold answers for
multi-reference exact match).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ExampleRecord:
    """One dataset instance: an input text and its gold output."""

    id: str
    source: str
    target: str
    targets_alt: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.id:
            raise DataError("record id must be non-empty")
        if not self.source:
            raise DataError(f"record {self.id!r}: source must be non-empty")

    @property
    def all_targets(self) -> tuple[str, ...]:
        """Primary target plus any alternates, for multi-reference scoring."""
        return (self.target, *self.targets_alt)


@dataclass(frozen=True)
class DatasetSplit:
    """A train/eval pair with disjoint id sets."""

    train: tuple[ExampleRecord, ...]
    eval: tuple[ExampleRecord, ...]

    def __post_init__(self) -> None:
        overlap = {r.id for r in self.train} & {r.id for r in self.eval}
        if overlap:
            sample = sorted(overlap)[:3]
            raise DataError(f"train and eval share ids: {sample}")


def _record_from_obj(obj: dict, lineno: int) -> ExampleRecord:
    if not isinstance(obj, dict):
        raise DataError(f"line {lineno}: expected a JSON object")
    for key in ("id", "source", "target"):
        if key not in obj:
            raise DataError(f"line {lineno}: missing key {key!r}")
        if not isinstance(obj[key], str):
            raise DataError(f"line {lineno}: key {key!r} must be a string")
    alt = obj.get("targets_alt", [])
    if not isinstance(alt, list) or not all(isinstance(t, str) for t in alt):
        raise DataError(f"line {lineno}: targets_alt must be a list of strings")
    try:
        return ExampleRecord(
            id=obj["id"], source=obj["source"], target=obj["target"],
            targets_alt=tuple(alt),
        )
    except DataError as exc:
        raise DataError(f"line {lineno}: {exc}") from None


def load_records(path: str | Path) -> list[ExampleRecord]:
    """Load and validate a JSON-Lines record file.

    Records come back in file order. Raises DataError with the offending
    line number for malformed lines, and with the offending id for
    duplicates.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"record file not found: {path}")
    records: list[ExampleRecord] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            rec = _record_from_obj(obj, lineno)
            if rec.id in seen:
                raise DataError(f"line {lineno}: duplicate id {rec.id!r}")
            seen.add(rec.id)
            records.append(rec)
    return records


def write_records(records: list[ExampleRecord], path: str | Path) -> None:
    """Write records as JSON-Lines, the inverse of load_records."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            obj: dict = {"id": rec.id, "source": rec.source, "target": rec.target}
            if rec.targets_alt:
                obj["targets_alt"] = list(rec.targets_alt)
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def subsample_indices(n: int, size: int, seed: int) -> np.ndarray:
    """Sorted uniform random index subset without replacement.

    Deterministic: uses numpy's PCG64 generator seeded explicitly, so the
    same (n, size, seed) yields the same subset on any machine. Callers that
    hold arrays aligned to a record list use this to slice both consistently.
    """
    if not 1 <= size <= n:
        raise DataError(f"subsample size {size} out of range [1, {n}]")
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=size, replace=False)
    idx.sort()
    return idx


def subsample(
    records: list[ExampleRecord], size: int, seed: int
) -> list[ExampleRecord]:
    """Uniform random subset without replacement, preserving relative order."""
    idx = subsample_indices(len(records), size, seed)
    return [records[i] for i in idx]
