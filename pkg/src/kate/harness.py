"""Config-driven experiment runner: method comparison and ablation sweeps.

A run evaluates one selection method (retrieval, random, or the pure kNN
predictor) over an eval set: select demonstrations per item, render the
prompt, complete it against the configured backend, score per task. Sweeps
repeat runs across k values, retrieval pool sizes, or prompt orders and
emit a combined CSV for plotting.

Reports are written deterministically: items.jsonl and summary.json depend
only on (config, fixtures); wall-clock numbers go to a separate
run_stats.json sidecar so canonical outputs stay byte-stable across reruns.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import httpx
import numpy as np

from . import lm, metrics, prompts
from .baselines import (
    knn_predict_generation,
    knn_predict_vote,
    random_select,
    trial_seed,
)
from .errors import BackendError, DataError
from .records import ExampleRecord, load_records, subsample_indices, write_records
from .retriever import NeighborList, OrderMode, apply_order, top_k_batch
from .similarity import NEG_EUCLIDEAN, validate_metric
from .store import EmbeddingStore, load_embeddings, write_embeddings

logger = logging.getLogger(__name__)

METHODS = ("kate", "random", "knn")
DEFAULT_K = {"sentiment": 3, "table2text": 2, "qa": 64}
DEFAULT_MAX_TOKENS = {"sentiment": 4, "table2text": 128, "qa": 32}
METRIC_NAME = {"sentiment": "accuracy", "table2text": "bleu", "qa": "em"}
RANDOM_BASELINE_TRIALS = 5


@dataclass(frozen=True)
class ExperimentConfig:
    train_records: str = ""
    eval_records: str = ""
    train_embeddings: str | None = None
    eval_embeddings: str | None = None
    method: str = "kate"
    metric: str = NEG_EUCLIDEAN
    k: int | None = None
    order: str = "default"
    trials: int = 1
    master_seed: int = 0
    template: str | None = None
    task: str = "qa"
    budget: int = 2048
    counter: str = "whitespace"
    backend: dict = field(default_factory=lambda: {"kind": "mock_nearest_echo"})
    max_in_flight: int = 4
    max_tokens: int | None = None
    eval_limit: int | None = None
    study_size: int = 100
    sweep: dict | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise DataError(f"unknown method {self.method!r}, expected {METHODS}")
        validate_metric(self.metric)
        if self.k is not None and self.k < 1:
            raise DataError("k must be >= 1")
        if self.trials < 1:
            raise DataError("trials must be >= 1")
        if self.budget <= 0:
            raise DataError("budget must be positive")
        OrderMode.parse(self.order)

    def resolved_k(self) -> int:
        return self.k if self.k is not None else DEFAULT_K[self.task_kind()]

    def resolved_max_tokens(self) -> int:
        if self.max_tokens is not None:
            return self.max_tokens
        return DEFAULT_MAX_TOKENS[self.task_kind()]

    def task_kind(self) -> str:
        if self.template:
            return prompts.load_template(self.template).task_kind
        return self.task


_CONFIG_FIELDS = {f.name for f in ExperimentConfig.__dataclass_fields__.values()}


def load_config(path: str | Path | None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a config from an optional JSON file plus overrides.

    Precedence: overrides (CLI) > file > dataclass defaults.
    """
    merged: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise DataError(f"config file not found: {p}")
        try:
            loaded = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{p}: invalid JSON ({exc.msg})") from None
        if not isinstance(loaded, dict):
            raise DataError(f"{p}: config must be a JSON object")
        merged.update(loaded)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    unknown = set(merged) - _CONFIG_FIELDS
    if unknown:
        raise DataError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**merged)


@dataclass
class ExperimentReport:
    config: dict
    metric_name: str
    trial_summary: metrics.TrialSummary
    rows: list[dict]
    n_eval: int
    wall_clock_s: float


def _resolve_template(config: ExperimentConfig) -> prompts.PromptTemplate:
    if config.template:
        return prompts.load_template(config.template)
    return prompts.default_template(config.task)


def _resolve_counter(config: ExperimentConfig):
    if config.counter == "whitespace":
        return prompts.WhitespaceCounter()
    if config.counter.startswith("bpe:"):
        return prompts.BpeCounter(config.counter.split(":", 1)[1])
    raise DataError(f"unknown token counter {config.counter!r}")


def _load_json_maybe_path(spec: dict, inline_key: str, path_key: str) -> dict:
    if inline_key in spec:
        return dict(spec[inline_key])
    if path_key in spec:
        return json.loads(Path(spec[path_key]).read_text(encoding="utf-8"))
    raise DataError(f"backend spec needs {inline_key!r} or {path_key!r}")


def build_backend(
    spec: dict,
    train_records: list[ExampleRecord],
    eval_records: list[ExampleRecord],
):
    """Instantiate a completion backend from its config spec."""
    kind = spec.get("kind")
    if kind == "http":
        if "endpoint" not in spec:
            raise DataError("http backend requires an endpoint")
        return lm.HttpBackend(
            endpoint=spec["endpoint"],
            model=spec.get("model", ""),
            api_key_env=spec.get("api_key_env", "KATE_API_KEY"),
            timeout=float(spec.get("timeout", 60.0)),
            debug_log=bool(spec.get("debug_log", False)),
        )
    if kind == "mock_table":
        return lm.MockTableBackend(
            _load_json_maybe_path(spec, "table", "table_path")
        )
    if kind == "mock_nearest_echo":
        return lm.MockNearestEchoBackend(
            {r.id: r.target for r in train_records}
        )
    if kind == "mock_cluster_aware":
        labels = _load_json_maybe_path(spec, "labels", "labels_path")
        answers = {r.id: r.target for r in eval_records}
        return lm.MockClusterAwareBackend(
            labels_by_id=labels,
            answers_by_id=answers,
            wrong_answer=spec.get("wrong_answer", "out of cluster"),
        )
    if kind == "mock_constant":
        return lm._ContextFree(text=spec.get("text", "constant"))
    raise DataError(f"unknown backend kind {kind!r}")


def _score_item(task_kind: str, completion: str, record: ExampleRecord) -> float:
    if task_kind == "qa":
        return float(metrics.exact_match(completion, list(record.all_targets)))
    if task_kind == "sentiment":
        return float(completion.strip() == record.target)
    # per-item sentence BLEU is informational; the trial aggregate is corpus-level
    return (
        metrics.corpus_bleu([completion], [list(record.all_targets)]) / 100.0
    )


def _aggregate(task_kind: str, completions: list[str], records) -> float:
    if task_kind == "qa":
        return float(
            np.mean(
                [
                    metrics.exact_match(c, list(r.all_targets))
                    for c, r in zip(completions, records)
                ]
            )
        )
    if task_kind == "sentiment":
        return metrics.accuracy(
            [c.strip() for c in completions], [r.target for r in records]
        )
    return metrics.corpus_bleu(
        completions, [list(r.all_targets) for r in records]
    )


@dataclass
class _RunInputs:
    train_records: list[ExampleRecord]
    eval_records: list[ExampleRecord]
    train_store: EmbeddingStore | None
    eval_store: EmbeddingStore | None
    template: prompts.PromptTemplate
    counter: object
    backend: object
    params: lm.CompletionParams


def _load_inputs(config: ExperimentConfig) -> _RunInputs:
    train_records = load_records(config.train_records)
    eval_records = load_records(config.eval_records)
    if not eval_records:
        raise DataError(f"eval set is empty: {config.eval_records}")
    overlap = {r.id for r in train_records} & {r.id for r in eval_records}
    if overlap:
        raise DataError(f"train and eval share ids: {sorted(overlap)[:3]}")
    needs_vectors = config.method in ("kate", "knn")
    train_store = eval_store = None
    if needs_vectors:
        if not config.train_embeddings or not config.eval_embeddings:
            raise DataError(
                f"method {config.method!r} requires train and eval embeddings"
            )
        train_store = load_embeddings(config.train_embeddings, train_records)
        eval_store = load_embeddings(config.eval_embeddings, eval_records)
    if config.eval_limit is not None:
        eval_records = eval_records[: config.eval_limit]
        if eval_store is not None:
            eval_store = eval_store.take(np.arange(len(eval_records)))
    template = _resolve_template(config)
    counter = _resolve_counter(config)
    backend = build_backend(config.backend, train_records, eval_records)
    params = lm.CompletionParams(
        temperature=0.0,
        stop_sequence="\n",
        max_tokens=config.resolved_max_tokens(),
    )
    return _RunInputs(
        train_records=train_records,
        eval_records=eval_records,
        train_store=train_store,
        eval_store=eval_store,
        template=template,
        counter=counter,
        backend=backend,
        params=params,
    )


def _prompt_rows_for_trial(
    config: ExperimentConfig,
    inputs: _RunInputs,
    trial: int,
    kate_neighbors: list[NeighborList] | None,
) -> tuple[list[prompts.PromptContext], list[list[str]]]:
    """Build prompts (and the per-item selected id lists) for one trial."""
    order = OrderMode.parse(config.order)
    k = config.resolved_k()
    contexts: list[prompts.PromptContext] = []
    selected_ids: list[list[str]] = []
    for i, rec in enumerate(inputs.eval_records):
        if config.method == "random":
            chosen = random_select(
                inputs.train_records, k, trial_seed(config.master_seed, trial, i)
            ).chosen
        else:
            nl = apply_order(kate_neighbors[i], order)
            chosen = tuple(inputs.train_records[j] for j in nl.indices)
        try:
            ctx = prompts.render(
                list(chosen), rec.source, inputs.template, config.budget,
                inputs.counter,
            )
        except DataError as exc:
            raise type(exc)(f"item {rec.id!r}: {exc}") from None
        contexts.append(
            prompts.PromptContext(
                text=ctx.text,
                included=ctx.included,
                truncated_count=ctx.truncated_count,
                test_id=rec.id,
            )
        )
        selected_ids.append([r.id for r in chosen])
    return contexts, selected_ids


def run(config: ExperimentConfig, output_dir: str | Path | None = None) -> ExperimentReport:
    """Execute one experiment and optionally persist its report.

    If the run aborts partway, rows completed so far are persisted to
    items.partial.jsonl under output_dir before the error propagates.
    """
    started = time.perf_counter()
    inputs = _load_inputs(config)
    task_kind = inputs.template.task_kind
    rows: list[dict] = []
    trial_scores: list[float] = []
    try:
        _run_trials(config, inputs, task_kind, rows, trial_scores)
    except Exception:
        if output_dir is not None and rows:
            out = Path(output_dir)
            out.mkdir(parents=True, exist_ok=True)
            with (out / "items.partial.jsonl").open("w", encoding="utf-8") as fh:
                for row in rows:
                    fh.write(
                        json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n"
                    )
        raise

    report = ExperimentReport(
        config=asdict(config),
        metric_name=METRIC_NAME[task_kind],
        trial_summary=metrics.summarize(trial_scores),
        rows=rows,
        n_eval=len(inputs.eval_records),
        wall_clock_s=time.perf_counter() - started,
    )
    if output_dir is not None:
        write_report(report, output_dir)
    return report


def _run_trials(
    config: ExperimentConfig,
    inputs: _RunInputs,
    task_kind: str,
    rows: list[dict],
    trial_scores: list[float],
) -> None:
    if config.method == "knn":
        for i, rec in enumerate(inputs.eval_records):
            query = inputs.eval_store.matrix[i]
            if task_kind == "sentiment":
                pred = knn_predict_vote(
                    query,
                    inputs.train_store,
                    inputs.train_records,
                    config.resolved_k(),
                    config.metric,
                )
            else:
                pred = knn_predict_generation(
                    query, inputs.train_store, inputs.train_records, config.metric
                )
            rows.append(
                {
                    "id": rec.id,
                    "trial": 0,
                    "selected": [],
                    "included": [],
                    "prompt_sha256": "",
                    "completion": pred,
                    "error": "",
                    "score": _score_item(task_kind, pred, rec),
                }
            )
        trial_scores.append(
            _aggregate(task_kind, [r["completion"] for r in rows], inputs.eval_records)
        )
    else:
        kate_neighbors = None
        if config.method == "kate":
            trials = 1
            if config.trials != 1:
                logger.warning(
                    "retrieval selection is deterministic; running 1 trial"
                )
            kate_neighbors = top_k_batch(
                inputs.eval_store.matrix.astype(np.float64),
                inputs.train_store,
                config.resolved_k(),
                config.metric,
            )
        else:
            trials = max(config.trials, RANDOM_BASELINE_TRIALS)
            if trials != config.trials:
                logger.warning(
                    "random baseline runs %d trials (got trials=%d)",
                    trials,
                    config.trials,
                )
        for trial in range(trials):
            contexts, selected_ids = _prompt_rows_for_trial(
                config, inputs, trial, kate_neighbors
            )
            results = lm.batch_complete(
                inputs.backend, contexts, inputs.params, config.max_in_flight
            )
            completions: list[str] = []
            for rec, ctx, sel, result in zip(
                inputs.eval_records, contexts, selected_ids, results
            ):
                failed = isinstance(result, BackendError)
                completion = "" if failed else result
                completions.append(completion)
                rows.append(
                    {
                        "id": rec.id,
                        "trial": trial,
                        "selected": sel,
                        "included": list(ctx.included),
                        "prompt_sha256": hashlib.sha256(
                            ctx.text.encode("utf-8")
                        ).hexdigest(),
                        "completion": completion,
                        "error": str(result) if failed else "",
                        "score": 0.0
                        if failed
                        else _score_item(task_kind, completion, rec),
                    }
                )
            trial_scores.append(
                _aggregate(task_kind, completions, inputs.eval_records)
            )


def summary_dict(report: ExperimentReport) -> dict:
    summary = {
        "config": report.config,
        "metric": report.metric_name,
        "trials": list(report.trial_summary.trial_scores),
        "mean": report.trial_summary.mean,
        "std": report.trial_summary.std,
        "n_eval": report.n_eval,
    }
    if report.metric_name == "bleu":
        # the companion table-to-text metric needs external tooling
        summary["parent"] = "unavailable"
    return summary


def write_report(report: ExperimentReport, output_dir: str | Path) -> Path:
    """Persist items.jsonl + summary.json (deterministic) and timing sidecar."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "items.jsonl").open("w", encoding="utf-8") as fh:
        for row in report.rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
    (out / "summary.json").write_text(
        json.dumps(summary_dict(report), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    (out / "run_stats.json").write_text(
        json.dumps({"wall_clock_s": report.wall_clock_s}) + "\n",
        encoding="utf-8",
    )
    return out


def run_sweep(
    config: ExperimentConfig, output_dir: str | Path
) -> list[ExperimentReport]:
    """One report per sweep point plus a combined CSV of the aggregates."""
    if not config.sweep:
        raise DataError("run_sweep requires a sweep section in the config")
    keys = set(config.sweep) & {"k_values", "pool_sizes", "order_modes"}
    if len(keys) != 1:
        raise DataError(
            "sweep must set exactly one of k_values, pool_sizes, order_modes"
        )
    (key,) = keys
    values = config.sweep[key]
    if not values:
        raise DataError("sweep values must be non-empty")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)

    reports: list[ExperimentReport] = []
    csv_rows = []
    for value in values:
        point = replace(config, sweep=None)
        label = f"{key[:-1]}-{value}"
        if key == "k_values":
            point = replace(point, k=int(value))
        elif key == "order_modes":
            point = replace(point, order=str(value))
        else:
            point = _subsampled_pool_config(
                point, int(value), _pool_seed(config.master_seed, int(value)), out
            )
        report = run(point, out / label)
        reports.append(report)
        csv_rows.append(
            {
                "sweep": key,
                "value": value,
                "method": config.method,
                "metric": report.metric_name,
                "mean": report.trial_summary.mean,
                "std": report.trial_summary.std,
                "n_eval": report.n_eval,
            }
        )
    header = ["sweep", "value", "method", "metric", "mean", "std", "n_eval"]
    lines = [",".join(header)]
    lines += [",".join(str(r[h]) for h in header) for r in csv_rows]
    (out / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return reports


def _pool_seed(master_seed: int, size: int) -> int:
    """One subsample seed chain keyed by (master seed, pool size).

    The same size draws the same subset in every sweep that shares a master
    seed, so pool-size curves are comparable across sweep compositions.
    """
    return int(
        np.random.SeedSequence([master_seed, 0x706F6F6C, size]).generate_state(1)[0]
    )


def _subsampled_pool_config(
    config: ExperimentConfig, size: int, seed: int, out: Path
) -> ExperimentConfig:
    """Materialize a subsampled train pool (records + aligned vectors)."""
    train_records = load_records(config.train_records)
    idx = subsample_indices(len(train_records), size, seed)
    sub_records = [train_records[i] for i in idx]
    pool_dir = out / f"pool-{size}"
    pool_dir.mkdir(parents=True, exist_ok=True)
    records_path = pool_dir / "train.jsonl"
    write_records(sub_records, records_path)
    new = {"train_records": str(records_path)}
    if config.train_embeddings:
        store = load_embeddings(config.train_embeddings, train_records)
        emb_path = pool_dir / "train.kate"
        write_embeddings(store.take(idx), emb_path)
        new["train_embeddings"] = str(emb_path)
    return replace(config, **new)


def closest_farthest_study(
    config: ExperimentConfig, output_dir: str | Path | None = None
) -> dict:
    """Compare nearest-neighbor prompts against farthest-neighbor prompts.

    Both strategies run over the same eval subset and backend; the returned
    dict carries both aggregates and their gap.
    """
    inputs = _load_inputs(config)
    if inputs.train_store is None or inputs.eval_store is None:
        raise DataError("the distance study requires embeddings")
    task_kind = inputs.template.task_kind
    k = config.k if config.k is not None else 10
    n = min(config.study_size, len(inputs.eval_records))
    pick = subsample_indices(len(inputs.eval_records), n, config.master_seed)
    eval_records = [inputs.eval_records[i] for i in pick]
    eval_matrix = inputs.eval_store.matrix[pick].astype(np.float64)

    sides: dict[str, dict] = {}
    for side, farthest in (("closest", False), ("farthest", True)):
        neighbor_lists = top_k_batch(
            eval_matrix, inputs.train_store, k, config.metric, farthest=farthest
        )
        contexts = []
        for rec, nl in zip(eval_records, neighbor_lists):
            chosen = [inputs.train_records[j] for j in nl.indices]
            ctx = prompts.render(
                chosen, rec.source, inputs.template, config.budget, inputs.counter
            )
            contexts.append(
                prompts.PromptContext(
                    text=ctx.text,
                    included=ctx.included,
                    truncated_count=ctx.truncated_count,
                    test_id=rec.id,
                )
            )
        results = lm.batch_complete(
            inputs.backend, contexts, inputs.params, config.max_in_flight
        )
        completions = [
            "" if isinstance(r, BackendError) else r for r in results
        ]
        sides[side] = {
            "aggregate": _aggregate(task_kind, completions, eval_records),
            "n": len(eval_records),
            "k": k,
        }
    study = {
        "metric": METRIC_NAME[task_kind],
        "closest": sides["closest"],
        "farthest": sides["farthest"],
        "gap": sides["closest"]["aggregate"] - sides["farthest"]["aggregate"],
    }
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "study.json").write_text(
            json.dumps(study, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    return study


def recompute_report(report_dir: str | Path) -> dict:
    """Re-derive metrics for a stored report from its persisted completions."""
    report_dir = Path(report_dir)
    summary_path = report_dir / "summary.json"
    items_path = report_dir / "items.jsonl"
    if not summary_path.exists() or not items_path.exists():
        raise DataError(f"{report_dir} does not contain a report")
    summary = json.loads(summary_path.read_text(encoding="utf-8"))
    config = ExperimentConfig(**summary["config"])
    eval_records = {r.id: r for r in load_records(config.eval_records)}
    task_kind = config.task_kind()

    by_trial: dict[int, list[tuple[str, str]]] = {}
    with items_path.open("r", encoding="utf-8") as fh:
        for line in fh:
            row = json.loads(line)
            by_trial.setdefault(row["trial"], []).append(
                (row["id"], row["completion"])
            )
    trial_scores = []
    for trial in sorted(by_trial):
        ids, completions = zip(*by_trial[trial])
        recs = [eval_records[i] for i in ids]
        trial_scores.append(_aggregate(task_kind, list(completions), recs))
    summary_now = metrics.summarize(trial_scores)
    return {
        "metric": summary["metric"],
        "trials": list(summary_now.trial_scores),
        "mean": summary_now.mean,
        "std": summary_now.std,
        "stored_mean": summary["mean"],
        "matches_stored": bool(
            np.isclose(summary_now.mean, summary["mean"], atol=1e-12)
        ),
    }


def ingest(records_path: str | Path, embeddings_path: str | Path | None = None) -> dict:
    """Validate a record file (and optional embedding file) and report stats."""
    records = load_records(records_path)
    info: dict = {"records": len(records)}
    if embeddings_path is not None:
        store = load_embeddings(embeddings_path, records)
        info.update(
            rows=store.rows, dim=store.dim, encoder_tag=store.encoder_tag
        )
    return info


def resolve_query_vector(
    store: EmbeddingStore,
    query_id: str | None = None,
    query_text: str | None = None,
    exporter_url: str | None = None,
    client: httpx.Client | None = None,
) -> np.ndarray:
    """Turn a query id (store row) or raw text (via exporter) into a vector."""
    if (query_id is None) == (query_text is None):
        raise DataError("provide exactly one of query_id or query_text")
    if query_id is not None:
        return store.matrix[store.index_of(query_id)].astype(np.float64)
    if not exporter_url:
        raise DataError("query_text requires a live exporter endpoint URL")
    own_client = client is None
    client = client or httpx.Client(timeout=30.0)
    try:
        resp = client.post(exporter_url, json={"texts": [query_text]})
        if resp.status_code != 200:
            raise BackendError(
                f"exporter endpoint returned HTTP {resp.status_code}: "
                f"{resp.text[:200]}"
            )
        payload = resp.json()
        vectors = payload.get("vectors")
        if not vectors or len(vectors) != 1:
            raise BackendError("exporter endpoint returned no vector")
        vec = np.asarray(vectors[0], dtype=np.float64)
    except httpx.HTTPError as exc:
        raise BackendError(f"exporter endpoint unreachable: {exc}") from None
    finally:
        if own_client:
            client.close()
    if vec.shape[0] != store.dim:
        raise DataError(
            f"exporter returned dim {vec.shape[0]}, store has dim {store.dim}"
        )
    return vec
