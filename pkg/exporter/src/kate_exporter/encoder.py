"""Sentence encoding with pre-trained transformer checkpoints.

Loads any transformers checkpoint (hub name or local path), runs it in
eval mode under no_grad, and pools token states into one vector per text:
either the first-position (CLS) state or a mask-weighted mean. Optionally
L2-normalizes the output. No fine-tuning happens here; checkpoints are
consumed as published.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

POOLINGS = ("cls", "mean")


class ExporterError(Exception):
    pass


@dataclass(frozen=True)
class EncoderSpec:
    checkpoint: str
    pooling: str = "cls"
    normalize: bool = False

    def __post_init__(self) -> None:
        if self.pooling not in POOLINGS:
            raise ExporterError(
                f"pooling must be one of {POOLINGS}, got {self.pooling!r}"
            )

    @property
    def encoder_tag(self) -> str:
        """Uniquely identifies (checkpoint, pooling, normalize)."""
        return f"{self.checkpoint}|pooling={self.pooling}|normalize={self.normalize}"


class SentenceEncoder:
    """A loaded checkpoint plus its pooling rule."""

    def __init__(self, spec: EncoderSpec, max_length: int = 512):
        self.spec = spec
        self.max_length = max_length
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(spec.checkpoint)
            self.model = AutoModel.from_pretrained(spec.checkpoint)
        except Exception as exc:
            raise ExporterError(
                f"cannot load checkpoint {spec.checkpoint!r}: {exc}"
            ) from exc
        self.model.eval()

    @property
    def dim(self) -> int:
        return int(self.model.config.hidden_size)

    def encode(self, texts: list[str], batch_size: int = 32) -> np.ndarray:
        """Encode texts to a float32 matrix, one row per text, input order.

        Raises ExporterError with the offending row index if a vector comes
        out non-finite.
        """
        if batch_size < 1:
            raise ExporterError("batch_size must be >= 1")
        out = np.empty((len(texts), self.dim), dtype=np.float32)
        for start in range(0, len(texts), batch_size):
            batch = texts[start : start + batch_size]
            out[start : start + len(batch)] = self._encode_batch(batch)
        bad = ~np.isfinite(out).all(axis=1)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise ExporterError(f"non-finite embedding at row {row}")
        return out

    def _encode_batch(self, texts: list[str]) -> np.ndarray:
        enc = self.tokenizer(
            texts,
            padding=True,
            truncation=True,
            max_length=self.max_length,
            return_tensors="pt",
        )
        with torch.no_grad():
            hidden = self.model(**enc).last_hidden_state
        if self.spec.pooling == "cls":
            pooled = hidden[:, 0]
        else:
            mask = enc["attention_mask"].unsqueeze(-1).to(hidden.dtype)
            pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1)
        if self.spec.normalize:
            pooled = torch.nn.functional.normalize(pooled, dim=-1)
        return pooled.float().cpu().numpy()
