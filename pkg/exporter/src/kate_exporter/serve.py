"""HTTP embedding endpoint for on-the-fly query encoding.

POST /embed with {"texts": [...]} returns {"dim": D, "vectors": [[...]]},
the schema the retrieval CLI's --query-text path consumes. Malformed
requests come back as 400 with a message.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .encoder import EncoderSpec, ExporterError, SentenceEncoder


class EmbedRequest(BaseModel):
    texts: list[str]


class EmbedResponse(BaseModel):
    dim: int
    vectors: list[list[float]]


def create_app(
    spec: EncoderSpec, encoder: SentenceEncoder | None = None, batch_size: int = 32
) -> FastAPI:
    encoder = encoder or SentenceEncoder(spec)
    app = FastAPI(title="kate-exporter", description="sentence embedding endpoint")

    @app.exception_handler(RequestValidationError)
    def _bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(ExporterError)
    def _exporter_error(request: Request, exc: ExporterError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "encoder_tag": spec.encoder_tag}

    @app.post("/embed", response_model=EmbedResponse)
    def embed(req: EmbedRequest):
        if not req.texts:
            return EmbedResponse(dim=encoder.dim, vectors=[])
        matrix = encoder.encode(req.texts, batch_size=batch_size)
        return EmbedResponse(dim=encoder.dim, vectors=matrix.tolist())

    return app
