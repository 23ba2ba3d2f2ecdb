"""Prompt assembly: join selected examples and a test source under a budget.

One example renders as source line plus target line; examples are joined by
the template separator (a newline by default) and the prompt ends with the
rendered test source awaiting completion. When the budget is exceeded,
whole examples are dropped from the end of the selection, never truncated
mid-example and never reordered.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import DataError, UnpromptableError
from .records import ExampleRecord

TASK_KINDS = ("sentiment", "table2text", "qa")

_CLOSING_TAG = re.compile(r"</[^<>]+>")


@dataclass(frozen=True)
class PromptTemplate:
    source_prefix: str
    target_prefix: str
    example_separator: str = "\n"
    task_kind: str = "qa"

    def __post_init__(self) -> None:
        if not self.example_separator:
            raise DataError("example_separator must be non-empty")
        if self.task_kind not in TASK_KINDS:
            raise DataError(
                f"unknown task_kind {self.task_kind!r}, expected one of {TASK_KINDS}"
            )

    def render_example(self, record: ExampleRecord) -> str:
        return (
            f"{self.source_prefix}{record.source}\n"
            f"{self.target_prefix}{record.target}"
        )

    def render_test(self, test_source: str) -> str:
        # trailing spaces after the cue hurt completion models, strip them
        return f"{self.source_prefix}{test_source}\n{self.target_prefix}".rstrip(
            " \t"
        )


@dataclass(frozen=True)
class PromptContext:
    """A fully assembled prompt plus bookkeeping about what went into it."""

    text: str
    included: tuple[str, ...]
    truncated_count: int
    test_id: str | None = None


class WhitespaceCounter:
    """Token count approximation: whitespace-separated chunks."""

    name = "whitespace"

    def count(self, text: str) -> int:
        return len(text.split())


class BpeCounter:
    """Byte-pair token counter driven by a merges vocabulary file.

    The file holds one merge per line, two space-separated symbols, ranked
    by line order; '#' lines are comments. Counting applies merges over the
    raw character stream (whitespace included), so any non-empty text
    counts at least one token.
    """

    def __init__(self, vocab_path: str | Path):
        path = Path(vocab_path)
        if not path.exists():
            raise DataError(f"BPE vocabulary not found: {path}")
        self.name = f"bpe:{path.name}"
        self._ranks: dict[tuple[str, str], int] = {}
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split(" ")
                if len(parts) != 2:
                    raise DataError(f"bad merge line in {path}: {line!r}")
                self._ranks.setdefault((parts[0], parts[1]), len(self._ranks))

    def count(self, text: str) -> int:
        if not text:
            return 0
        symbols = list(text)
        while len(symbols) > 1:
            best_rank = None
            best_pos = -1
            for i in range(len(symbols) - 1):
                rank = self._ranks.get((symbols[i], symbols[i + 1]))
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank, best_pos = rank, i
            if best_rank is None:
                break
            merged = symbols[best_pos] + symbols[best_pos + 1]
            out = []
            i = 0
            pair = (symbols[best_pos], symbols[best_pos + 1])
            while i < len(symbols):
                if (
                    i < len(symbols) - 1
                    and (symbols[i], symbols[i + 1]) == pair
                ):
                    out.append(merged)
                    i += 2
                else:
                    out.append(symbols[i])
                    i += 1
            symbols = out
        return len(symbols)


def count_tokens(text: str, counter) -> int:
    """Deterministic token count under the configured counter."""
    return counter.count(text)


def totto_preprocess(table_linearization: str) -> str:
    """Remove closing tags like </cell> from a linearized table string.

    Opening tags and cell contents are untouched; tag-free text passes
    through unchanged.
    """
    return _CLOSING_TAG.sub("", table_linearization)


def render(
    selected,
    test_source: str,
    template: PromptTemplate,
    budget: int,
    counter,
) -> PromptContext:
    """Assemble the prompt for one test source.

    ``selected`` is anything with a ``chosen`` list of records (a
    SelectionResult) or a plain list of records. Examples that overflow the
    budget are dropped from the end of the selection; the survivors are
    always a prefix of the selection, in its original order.
    """
    chosen = list(getattr(selected, "chosen", selected))
    tail = template.render_test(test_source)
    if counter.count(tail) > budget:
        raise UnpromptableError(
            f"test source alone exceeds the token budget ({budget})"
        )
    blocks = [template.render_example(rec) for rec in chosen]
    sep = template.example_separator
    while blocks:
        text = sep.join([*blocks, tail])
        if counter.count(text) <= budget:
            break
        blocks.pop()
    else:
        text = tail
    included = tuple(rec.id for rec in chosen[: len(blocks)])
    return PromptContext(
        text=text,
        included=included,
        truncated_count=len(chosen) - len(blocks),
    )


def load_template(path: str | Path) -> PromptTemplate:
    """Read a template from its JSON file form."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"template file not found: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc.msg})") from None
    return _template_from_obj(obj, str(path))


def default_template(task_kind: str) -> PromptTemplate:
    """The packaged template for a task kind."""
    if task_kind not in TASK_KINDS:
        raise DataError(
            f"unknown task_kind {task_kind!r}, expected one of {TASK_KINDS}"
        )
    data = (
        resources.files("kate").joinpath(f"templates/{task_kind}.json").read_text()
    )
    return _template_from_obj(json.loads(data), f"templates/{task_kind}.json")


def _template_from_obj(obj: dict, origin: str) -> PromptTemplate:
    if not isinstance(obj, dict):
        raise DataError(f"{origin}: template must be a JSON object")
    for key in ("source_prefix", "target_prefix", "task_kind"):
        if key not in obj:
            raise DataError(f"{origin}: missing template key {key!r}")
    return PromptTemplate(
        source_prefix=obj["source_prefix"],
        target_prefix=obj["target_prefix"],
        example_separator=obj.get("example_separator", "\n"),
        task_kind=obj["task_kind"],
    )
