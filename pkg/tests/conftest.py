from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from kate.records import ExampleRecord, write_records
from kate.store import EmbeddingStore, write_embeddings
from kate.synthetic import ClusterDataset, make_cluster_dataset


def make_records(n: int, prefix: str = "r") -> list[ExampleRecord]:
    return [
        ExampleRecord(
            id=f"{prefix}{i:04d}",
            source=f"source text {i}",
            target=f"target {i}",
        )
        for i in range(n)
    ]


def make_store(
    n: int, dim: int, seed: int = 0, prefix: str = "r"
) -> EmbeddingStore:
    rng = np.random.default_rng(seed)
    return EmbeddingStore(
        matrix=rng.standard_normal((n, dim)).astype(np.float32),
        ids=tuple(f"{prefix}{i:04d}" for i in range(n)),
        encoder_tag="test",
    )


def write_jsonl(path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


@pytest.fixture
def records10() -> list[ExampleRecord]:
    return make_records(10)


def write_dataset(
    directory: Path, dataset: ClusterDataset
) -> dict[str, str]:
    """Materialize a cluster dataset to disk, returning harness config paths."""
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "train_records": str(directory / "train.jsonl"),
        "eval_records": str(directory / "eval.jsonl"),
        "train_embeddings": str(directory / "train.kate"),
        "eval_embeddings": str(directory / "eval.kate"),
    }
    write_records(list(dataset.train_records), paths["train_records"])
    write_records(list(dataset.eval_records), paths["eval_records"])
    write_embeddings(dataset.train_store, paths["train_embeddings"])
    write_embeddings(dataset.eval_store, paths["eval_embeddings"])
    return paths


@pytest.fixture(scope="session")
def small_cluster_paths(tmp_path_factory) -> dict[str, str]:
    """A compact separable cluster dataset shared by harness-level tests."""
    dataset = make_cluster_dataset(
        n_train_per_cluster=40, n_eval=20, dim=8, sigma=0.4, separation=8.0, seed=5
    )
    directory = tmp_path_factory.mktemp("cluster-small")
    paths = write_dataset(directory, dataset)
    paths["labels"] = json.dumps(dataset.labels_by_id)
    return paths


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" in nodeid and report.when == "call":
                name = nodeid.split("::")[-1]
                lines.append((name, outcome.upper()))
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name, outcome in sorted(lines):
            terminalreporter.write_line(
                f"{'PASS' if outcome == 'PASSED' else 'FAIL'}  {name}"
            )
