from __future__ import annotations

import numpy as np
import pytest
from fastapi.testclient import TestClient

from kate_exporter.encoder import EncoderSpec, SentenceEncoder
from kate_exporter.serve import create_app


@pytest.fixture(scope="module")
def client(tiny_checkpoint) -> TestClient:
    spec = EncoderSpec(checkpoint=tiny_checkpoint)
    return TestClient(create_app(spec))


def test_health_reports_tag(client, tiny_checkpoint):
    body = client.get("/health").json()
    assert body["status"] == "ok"
    assert tiny_checkpoint in body["encoder_tag"]


def test_empty_texts(client):
    resp = client.post("/embed", json={"texts": []})
    assert resp.status_code == 200
    body = resp.json()
    assert body["vectors"] == []
    assert body["dim"] == 16


def test_single_text_shape(client):
    resp = client.post("/embed", json={"texts": ["hello there"]})
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["vectors"]) == 1
    assert len(body["vectors"][0]) == body["dim"] == 16


def test_malformed_request_is_400(client):
    assert client.post("/embed", json={"text": "wrong key"}).status_code == 400
    assert client.post("/embed", json={"texts": "not a list"}).status_code == 400


def test_served_matches_direct_encoding(client, tiny_checkpoint):
    texts = ["alpha beta", "gamma delta epsilon"]
    body = client.post("/embed", json={"texts": texts}).json()
    direct = SentenceEncoder(EncoderSpec(tiny_checkpoint)).encode(texts)
    served = np.asarray(body["vectors"], dtype=np.float32)
    assert np.allclose(served, direct, atol=1e-5)
