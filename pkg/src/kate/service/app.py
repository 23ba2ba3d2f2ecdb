"""FastAPI service wrapping the experiment harness.

Stores are immutable once loaded, so a small cache keyed by (path, mtime,
size) lets many requests share one loaded store. Validation problems map to
HTTP 400, backend failures to 502.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import harness
from ..errors import BackendError, DataError
from ..records import load_records
from ..retriever import OrderMode, apply_order, farthest_k, top_k
from ..store import EmbeddingStore, load_embeddings
from .schemas import (
    IngestRequest,
    IngestResponse,
    Neighbor,
    ReportRequest,
    ReportResponse,
    RetrieveRequest,
    RetrieveResponse,
    RunRequest,
    RunSummary,
    StudyResponse,
    SweepRequest,
    SweepResponse,
)

_STORE_CACHE_SIZE = 8


class _StoreCache:
    """LRU of loaded stores keyed by file identity."""

    def __init__(self, max_size: int = _STORE_CACHE_SIZE):
        self._max = max_size
        self._lock = threading.Lock()
        self._entries: dict[tuple, EmbeddingStore] = {}
        self._order: list[tuple] = []

    def get(self, path: str) -> EmbeddingStore:
        stat = Path(path).stat() if Path(path).exists() else None
        if stat is None:
            raise DataError(f"embedding file not found: {path}")
        key = (str(Path(path).resolve()), stat.st_mtime_ns, stat.st_size)
        with self._lock:
            if key in self._entries:
                self._order.remove(key)
                self._order.append(key)
                return self._entries[key]
        store = load_embeddings(path)
        with self._lock:
            self._entries[key] = store
            self._order.append(key)
            while len(self._order) > self._max:
                evicted = self._order.pop(0)
                self._entries.pop(evicted, None)
        return store


def _config_from_model(model) -> harness.ExperimentConfig:
    return harness.ExperimentConfig(**model.model_dump())


def create_app() -> FastAPI:
    app = FastAPI(
        title="kate",
        description="Semantic retrieval of in-context examples for few-shot prompting",
    )
    stores = _StoreCache()

    @app.exception_handler(DataError)
    def _data_error(request, exc: DataError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(BackendError)
    def _backend_error(request, exc: BackendError):
        return JSONResponse(status_code=502, content={"detail": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/ingest", response_model=IngestResponse)
    def ingest(req: IngestRequest):
        return harness.ingest(req.records, req.embeddings)

    @app.post("/retrieve", response_model=RetrieveResponse)
    def retrieve(req: RetrieveRequest):
        if req.records:
            records = load_records(req.records)
            store = load_embeddings(req.store, records)
        else:
            store = stores.get(req.store)
        query = harness.resolve_query_vector(
            store,
            query_id=req.query_id,
            query_text=req.query_text,
            exporter_url=req.exporter_url,
        )
        select = farthest_k if req.farthest else top_k
        nl = select(query, store, req.k, req.metric)
        nl = apply_order(nl, OrderMode.parse(req.order))
        return RetrieveResponse(
            metric=req.metric,
            order=req.order,
            neighbors=[
                Neighbor(index=i, id=store.ids[i], score=s)
                for i, s in nl.entries
            ],
        )

    @app.post("/run", response_model=RunSummary)
    def run(req: RunRequest):
        config = _config_from_model(req.config)
        report = harness.run(config, req.output_dir)
        return RunSummary(
            metric=report.metric_name,
            trials=list(report.trial_summary.trial_scores),
            mean=report.trial_summary.mean,
            std=report.trial_summary.std,
            n_eval=report.n_eval,
            output_dir=req.output_dir,
        )

    @app.post("/sweep", response_model=SweepResponse)
    def sweep(req: SweepRequest):
        config = _config_from_model(req.config)
        reports = harness.run_sweep(config, req.output_dir)
        points = [
            RunSummary(
                metric=r.metric_name,
                trials=list(r.trial_summary.trial_scores),
                mean=r.trial_summary.mean,
                std=r.trial_summary.std,
                n_eval=r.n_eval,
            )
            for r in reports
        ]
        return SweepResponse(
            points=points, csv_path=str(Path(req.output_dir) / "sweep.csv")
        )

    @app.post("/study-distance", response_model=StudyResponse)
    def study_distance(req: RunRequest):
        config = _config_from_model(req.config)
        return harness.closest_farthest_study(config, req.output_dir)

    @app.post("/report", response_model=ReportResponse)
    def report(req: ReportRequest):
        return harness.recompute_report(req.report_dir)

    return app
