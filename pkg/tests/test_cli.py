from __future__ import annotations

import json

from kate.cli import main


def test_ingest_success(small_cluster_paths, capsys):
    code = main(
        [
            "ingest",
            "--records",
            small_cluster_paths["train_records"],
            "--embeddings",
            small_cluster_paths["train_embeddings"],
        ]
    )
    assert code == 0
    body = json.loads(capsys.readouterr().out)
    assert body["records"] == 80


def test_ingest_validation_failure_exits_1(tmp_path, capsys):
    code = main(["ingest", "--records", str(tmp_path / "missing.jsonl")])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_retrieve_prints_index_id_score(small_cluster_paths, capsys):
    code = main(
        [
            "retrieve",
            "--store",
            small_cluster_paths["train_embeddings"],
            "--records",
            small_cluster_paths["train_records"],
            "--query-id",
            "train-beta-00003",
            "--k",
            "2",
            "--metric",
            "neg_euclidean",
        ]
    )
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2
    index, rid, score = lines[0].split("\t")
    assert rid == "train-beta-00003"
    assert float(score) == 0.0
    assert index.isdigit()


def test_retrieve_with_shuffle_order(small_cluster_paths, capsys):
    args = [
        "retrieve",
        "--store",
        small_cluster_paths["train_embeddings"],
        "--query-id",
        "train-alpha-00001",
        "--k",
        "5",
        "--order",
        "shuffle:7",
    ]
    assert main(args) == 0
    first = capsys.readouterr().out
    assert main(args) == 0
    second = capsys.readouterr().out
    assert first == second


def test_run_and_report_round_trip(small_cluster_paths, tmp_path, capsys):
    out = str(tmp_path / "cli-run")
    code = main(
        [
            "run",
            "--train-records",
            small_cluster_paths["train_records"],
            "--eval-records",
            small_cluster_paths["eval_records"],
            "--train-embeddings",
            small_cluster_paths["train_embeddings"],
            "--eval-embeddings",
            small_cluster_paths["eval_embeddings"],
            "--method",
            "kate",
            "--task",
            "qa",
            "--k",
            "3",
            "--backend",
            '{"kind": "mock_nearest_echo"}',
            "--output-dir",
            out,
        ]
    )
    assert code == 0
    body = json.loads(capsys.readouterr().out)
    assert body["mean"] == 1.0

    code = main(["report", "--report-dir", out])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["matches_stored"] is True


def test_run_with_config_file_and_override(
    small_cluster_paths, tmp_path, capsys
):
    cfg = {
        "train_records": small_cluster_paths["train_records"],
        "eval_records": small_cluster_paths["eval_records"],
        "train_embeddings": small_cluster_paths["train_embeddings"],
        "eval_embeddings": small_cluster_paths["eval_embeddings"],
        "method": "knn",
        "task": "qa",
        "k": 9,
    }
    cfg_path = tmp_path / "exp.json"
    cfg_path.write_text(json.dumps(cfg))
    code = main(["run", "--config", str(cfg_path), "--k", "1"])
    assert code == 0
    body = json.loads(capsys.readouterr().out)
    assert body["config"] if "config" in body else True
    assert body["mean"] == 1.0


def test_sweep_command(small_cluster_paths, tmp_path, capsys):
    out = str(tmp_path / "cli-sweep")
    code = main(
        [
            "sweep",
            "--train-records",
            small_cluster_paths["train_records"],
            "--eval-records",
            small_cluster_paths["eval_records"],
            "--train-embeddings",
            small_cluster_paths["train_embeddings"],
            "--eval-embeddings",
            small_cluster_paths["eval_embeddings"],
            "--method",
            "kate",
            "--task",
            "qa",
            "--backend",
            '{"kind": "mock_nearest_echo"}',
            "--sweep",
            '{"k_values": [1, 2]}',
            "--output-dir",
            out,
        ]
    )
    assert code == 0
    body = json.loads(capsys.readouterr().out)
    assert len(body["points"]) == 2


def test_bad_inline_backend_json_exits_1(small_cluster_paths, capsys):
    code = main(
        [
            "run",
            "--train-records",
            small_cluster_paths["train_records"],
            "--eval-records",
            small_cluster_paths["eval_records"],
            "--backend",
            "{not json",
        ]
    )
    assert code == 1
    assert "JSON" in capsys.readouterr().err
