"""Scoring: normalized exact match, accuracy, corpus BLEU, trial summaries.

Exact match follows the SQuAD convention: lowercase, strip punctuation,
strip the articles a/an/the, collapse whitespace; a prediction scores 1 iff
its normalized form equals any normalized gold answer. Punctuation means
the Unicode punctuation categories (P*), which can differ from ASCII-only
scorers on edge cases.
"""

from __future__ import annotations

import math
import re
import statistics
import unicodedata
from collections import Counter
from dataclasses import dataclass

from .errors import DataError

_ARTICLES = re.compile(r"\b(a|an|the)\b")


@dataclass(frozen=True)
class EvalOutcome:
    """Per-item scores in [0, 1] and their arithmetic mean."""

    per_item: tuple[tuple[str, float], ...]
    aggregate: float
    n: int


@dataclass(frozen=True)
class TrialSummary:
    """Mean and sample standard deviation over repeated trials."""

    trial_scores: tuple[float, ...]
    mean: float
    std: float


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation and articles, collapse whitespace."""
    text = text.lower()
    text = "".join(
        ch for ch in text if not unicodedata.category(ch).startswith("P")
    )
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def exact_match(prediction: str, golds: list[str]) -> int:
    """1 iff the normalized prediction equals any normalized gold answer."""
    if not golds:
        raise DataError("exact_match requires at least one gold answer")
    norm = normalize_answer(prediction)
    return int(any(norm == normalize_answer(g) for g in golds))


def accuracy(predictions: list[str], golds: list[str]) -> float:
    """Fraction of exactly equal labels, no normalization."""
    if len(predictions) != len(golds):
        raise DataError(
            f"length mismatch: {len(predictions)} predictions, {len(golds)} golds"
        )
    if not predictions:
        raise DataError("accuracy requires at least one item")
    return sum(p == g for p, g in zip(predictions, golds)) / len(predictions)


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(
        tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)
    )


def corpus_bleu(
    candidates: list[str],
    references: list[list[str]],
    max_order: int = 4,
    smooth: bool = False,
) -> float:
    """Corpus-level BLEU on whitespace tokens, in [0, 100].

    Geometric mean of modified n-gram precisions (n = 1..max_order) times
    the brevity penalty, with reference lengths matched per candidate to
    the closest reference (ties to the shorter). Unsmoothed by default; the
    smoothed variant adds one to every precision's numerator and
    denominator, for tiny corpora only.
    """
    if len(candidates) != len(references):
        raise DataError(
            f"length mismatch: {len(candidates)} candidates, "
            f"{len(references)} reference lists"
        )
    if not candidates:
        raise DataError("corpus_bleu requires at least one item")
    if any(not refs for refs in references):
        raise DataError("every candidate needs at least one reference")

    matched = [0] * max_order
    total = [0] * max_order
    cand_len = 0
    ref_len = 0
    for cand, refs in zip(candidates, references):
        cand_tokens = cand.split()
        ref_token_lists = [r.split() for r in refs]
        cand_len += len(cand_tokens)
        ref_len += min(
            (len(r) for r in ref_token_lists),
            key=lambda n: (abs(n - len(cand_tokens)), n),
        )
        for n in range(1, max_order + 1):
            counts = _ngrams(cand_tokens, n)
            if not counts:
                continue
            max_ref = Counter()
            for ref_tokens in ref_token_lists:
                for gram, c in _ngrams(ref_tokens, n).items():
                    max_ref[gram] = max(max_ref[gram], c)
            matched[n - 1] += sum(
                min(c, max_ref[gram]) for gram, c in counts.items()
            )
            total[n - 1] += sum(counts.values())

    precisions = []
    for m, t in zip(matched, total):
        if smooth:
            precisions.append((m + 1) / (t + 1))
        elif t == 0 or m == 0:
            return 0.0
        else:
            precisions.append(m / t)
    log_avg = sum(math.log(p) for p in precisions) / max_order
    if cand_len == 0:
        return 0.0
    brevity = 1.0 if cand_len > ref_len else math.exp(1 - ref_len / cand_len)
    return 100.0 * brevity * math.exp(log_avg)


def summarize(trial_scores: list[float]) -> TrialSummary:
    """Mean and sample standard deviation; std is 0 for a single trial."""
    if not trial_scores:
        raise DataError("summarize requires at least one trial score")
    mean = statistics.fmean(trial_scores)
    std = statistics.stdev(trial_scores) if len(trial_scores) > 1 else 0.0
    return TrialSummary(
        trial_scores=tuple(float(s) for s in trial_scores), mean=mean, std=std
    )
