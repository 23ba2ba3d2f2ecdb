"""Sentence-embedding export for the retrieval store format."""

from .encoder import EncoderSpec, ExporterError, SentenceEncoder
from .export import export, read_records, write_store
from .serve import create_app

__version__ = "0.1.0"

__all__ = [
    "EncoderSpec",
    "ExporterError",
    "SentenceEncoder",
    "create_app",
    "export",
    "read_records",
    "write_store",
]
