"""Completion backends: a production HTTP client and deterministic mocks.

Every backend is a total function from (prompt, params) to completion text
or a BackendError. The HTTP backend speaks the OpenAI-compatible
completions schema so any conforming server can stand in for the real
model; the mocks make the whole pipeline testable offline.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping

import httpx

from .errors import BackendError, DataError
from .prompts import PromptContext

logger = logging.getLogger(__name__)

_RETRY_BACKOFF_S = (1.0, 2.0, 4.0)


@dataclass(frozen=True)
class CompletionParams:
    temperature: float = 0.0
    stop_sequence: str = "\n"
    max_tokens: int = 64
    model_name: str = ""

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise DataError("temperature must be >= 0")
        if not self.stop_sequence:
            raise DataError("stop_sequence must be non-empty")


def strip_stop(text: str, stop_sequence: str) -> str:
    """Drop the stop sequence and everything after it."""
    return text.split(stop_sequence, 1)[0]


class HttpBackend:
    """OpenAI-compatible completions endpoint with retry on transient failures.

    Retries 3 attempts with 1s/2s/4s backoff, only for transport errors and
    429/5xx responses. The API key is read from the named environment
    variable and sent as a bearer token. With debug_log enabled, request
    and response bodies are logged with the auth header redacted.
    """

    def __init__(
        self,
        endpoint: str,
        model: str = "",
        api_key_env: str = "KATE_API_KEY",
        timeout: float = 60.0,
        debug_log: bool = False,
        client: httpx.Client | None = None,
        sleep=time.sleep,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.debug_log = debug_log
        self._client = client or httpx.Client(timeout=timeout)
        self._sleep = sleep

    def complete(self, prompt: PromptContext, params: CompletionParams) -> str:
        body = {
            "model": params.model_name or self.model,
            "prompt": prompt.text,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "stop": [params.stop_sequence],
        }
        headers = {}
        api_key = os.environ.get(self.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        if self.debug_log:
            logger.debug("request %s: %s", self.endpoint, json.dumps(body))
        last_error = "no attempts made"
        for backoff in (*_RETRY_BACKOFF_S, None):
            try:
                resp = self._client.post(
                    self.endpoint, json=body, headers=headers
                )
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
            else:
                if self.debug_log:
                    logger.debug(
                        "response %s: %s", resp.status_code, resp.text[:2000]
                    )
                if resp.status_code == 200:
                    return self._extract_text(resp)
                last_error = f"HTTP {resp.status_code}: {resp.text[:500]}"
                if resp.status_code != 429 and resp.status_code < 500:
                    break
            if backoff is None:
                break
            self._sleep(backoff)
        raise BackendError(last_error)

    @staticmethod
    def _extract_text(resp: httpx.Response) -> str:
        try:
            payload = resp.json()
            return payload["choices"][0]["text"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError):
            raise BackendError(
                f"malformed completion response: {resp.text[:500]}"
            ) from None


class MockTableBackend:
    """Deterministic lookup table from prompt text to completion."""

    def __init__(self, table: Mapping[str, str]):
        self.table = dict(table)

    def complete(self, prompt: PromptContext, params: CompletionParams) -> str:
        try:
            return self.table[prompt.text]
        except KeyError:
            raise BackendError(
                f"mock table has no completion for prompt "
                f"{prompt.text[:80]!r}"
            ) from None


class MockNearestEchoBackend:
    """Echoes the target of the first in-context example in the prompt.

    Holds the id-to-target map of the candidate pool, so with default
    neighbor order its answer on a retrieval-built prompt equals the pure
    top-1 kNN prediction.
    """

    def __init__(self, targets_by_id: Mapping[str, str]):
        self.targets_by_id = dict(targets_by_id)

    def complete(self, prompt: PromptContext, params: CompletionParams) -> str:
        if not prompt.included:
            raise BackendError("prompt has no in-context examples to echo")
        first = prompt.included[0]
        try:
            return self.targets_by_id[first]
        except KeyError:
            raise BackendError(f"unknown in-context example id {first!r}") from None


class MockClusterAwareBackend:
    """Answers correctly iff some in-context example shares the test label.

    Labels come from an id-to-label rule covering train and eval items;
    gold answers map eval ids to the correct completion. When no prompt
    example carries the test item's label, it emits a fixed wrong string.
    """

    def __init__(
        self,
        labels_by_id: Mapping[str, str],
        answers_by_id: Mapping[str, str],
        wrong_answer: str = "out of cluster",
    ):
        self.labels_by_id = dict(labels_by_id)
        self.answers_by_id = dict(answers_by_id)
        self.wrong_answer = wrong_answer

    def complete(self, prompt: PromptContext, params: CompletionParams) -> str:
        if prompt.test_id is None:
            raise BackendError("cluster-aware mock requires prompt.test_id")
        try:
            test_label = self.labels_by_id[prompt.test_id]
            answer = self.answers_by_id[prompt.test_id]
        except KeyError as exc:
            raise BackendError(f"no label/answer for test id {exc}") from None
        for ex_id in prompt.included:
            if self.labels_by_id.get(ex_id) == test_label:
                return answer
        return self.wrong_answer


@dataclass
class _ContextFree:
    """Test helper backend: same completion for every prompt."""

    text: str = "constant"

    def complete(self, prompt: PromptContext, params: CompletionParams) -> str:
        return self.text


def complete(backend, prompt: PromptContext, params: CompletionParams) -> str:
    """Run one completion and strip the stop sequence from the output."""
    return strip_stop(backend.complete(prompt, params), params.stop_sequence)


def batch_complete(
    backend,
    prompts: list[PromptContext],
    params: CompletionParams,
    max_in_flight: int = 4,
) -> list[str | BackendError]:
    """Complete many prompts with bounded concurrency.

    Results align positionally with the prompts; a failing prompt yields a
    BackendError in its slot without aborting the rest.
    """
    if max_in_flight < 1:
        raise DataError("max_in_flight must be >= 1")
    if not prompts:
        return []

    def one(prompt: PromptContext) -> str | BackendError:
        try:
            return complete(backend, prompt, params)
        except BackendError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(one, prompts))
