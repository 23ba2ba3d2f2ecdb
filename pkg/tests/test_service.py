from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from kate.service import create_app


@pytest.fixture()
def client() -> TestClient:
    return TestClient(create_app())


def run_payload(paths: dict, **overrides) -> dict:
    config = {
        "train_records": paths["train_records"],
        "eval_records": paths["eval_records"],
        "train_embeddings": paths["train_embeddings"],
        "eval_embeddings": paths["eval_embeddings"],
        "method": "kate",
        "task": "qa",
        "k": 3,
        "backend": {"kind": "mock_nearest_echo"},
    }
    config.update(overrides)
    return config


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok"}


def test_ingest_ok(client, small_cluster_paths):
    resp = client.post(
        "/ingest",
        json={
            "records": small_cluster_paths["train_records"],
            "embeddings": small_cluster_paths["train_embeddings"],
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["records"] == body["rows"] == 80
    assert body["dim"] == 8


def test_ingest_validation_error_is_400(client, tmp_path):
    missing = str(tmp_path / "nope.jsonl")
    resp = client.post("/ingest", json={"records": missing})
    assert resp.status_code == 400
    assert "not found" in resp.json()["detail"]


def test_retrieve_by_query_id(client, small_cluster_paths):
    resp = client.post(
        "/retrieve",
        json={
            "store": small_cluster_paths["train_embeddings"],
            "query_id": "train-alpha-00000",
            "k": 3,
            "metric": "neg_euclidean",
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["neighbors"]) == 3
    first = body["neighbors"][0]
    assert first["id"] == "train-alpha-00000"
    assert first["score"] == 0.0
    scores = [n["score"] for n in body["neighbors"]]
    assert scores == sorted(scores, reverse=True)


def test_retrieve_farthest_and_reverse_order(client, small_cluster_paths):
    base = {
        "store": small_cluster_paths["train_embeddings"],
        "query_id": "train-alpha-00000",
        "k": 4,
    }
    default = client.post("/retrieve", json=base).json()["neighbors"]
    reverse = client.post(
        "/retrieve", json={**base, "order": "reverse"}
    ).json()["neighbors"]
    assert default == reverse[::-1]
    farthest = client.post(
        "/retrieve", json={**base, "farthest": True}
    ).json()["neighbors"]
    assert all(n["id"].startswith("train-beta") for n in farthest)


def test_retrieve_unknown_id_is_400(client, small_cluster_paths):
    resp = client.post(
        "/retrieve",
        json={
            "store": small_cluster_paths["train_embeddings"],
            "query_id": "ghost",
        },
    )
    assert resp.status_code == 400


def test_retrieve_query_text_without_exporter_is_400(
    client, small_cluster_paths
):
    resp = client.post(
        "/retrieve",
        json={
            "store": small_cluster_paths["train_embeddings"],
            "query_text": "some new question",
        },
    )
    assert resp.status_code == 400
    assert "exporter" in resp.json()["detail"]


def test_run_endpoint(client, small_cluster_paths, tmp_path):
    out = str(tmp_path / "svc-run")
    resp = client.post(
        "/run",
        json={"config": run_payload(small_cluster_paths), "output_dir": out},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["metric"] == "em"
    assert body["mean"] == 1.0
    assert body["n_eval"] == 20
    summary = json.loads((tmp_path / "svc-run" / "summary.json").read_text())
    assert summary["mean"] == 1.0


def test_run_backend_failure_is_502(client, small_cluster_paths):
    config = run_payload(
        small_cluster_paths, backend={"kind": "mock_table", "table": {}}
    )
    resp = client.post("/run", json={"config": config})
    # every item fails but the run itself succeeds with zero scores
    assert resp.status_code == 200
    assert resp.json()["mean"] == 0.0


def test_sweep_endpoint(client, small_cluster_paths, tmp_path):
    out = str(tmp_path / "svc-sweep")
    config = run_payload(small_cluster_paths, sweep={"k_values": [1, 2]})
    resp = client.post("/sweep", json={"config": config, "output_dir": out})
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["points"]) == 2
    assert body["csv_path"].endswith("sweep.csv")


def test_study_endpoint(client, small_cluster_paths, tmp_path):
    config = run_payload(
        small_cluster_paths,
        backend={
            "kind": "mock_cluster_aware",
            "labels": json.loads(small_cluster_paths["labels"]),
        },
        k=5,
        study_size=10,
    )
    resp = client.post("/study-distance", json={"config": config})
    assert resp.status_code == 200
    body = resp.json()
    assert body["closest"]["aggregate"] == 1.0
    assert body["farthest"]["aggregate"] == 0.0


def test_report_endpoint(client, small_cluster_paths, tmp_path):
    out = str(tmp_path / "svc-report")
    client.post(
        "/run",
        json={"config": run_payload(small_cluster_paths), "output_dir": out},
    )
    resp = client.post("/report", json={"report_dir": out})
    assert resp.status_code == 200
    assert resp.json()["matches_stored"] is True
