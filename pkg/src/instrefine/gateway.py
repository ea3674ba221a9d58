"""Uniform access to chat-completion and embedding providers.

The gateway wraps a provider behind three guarantees the pipeline relies
on:

- every response is cached on disk under a content-addressed key, so an
  interrupted run resumes without re-spending API calls;
- transient failures are retried with exponential backoff, bounded by
  ``max_retries``; permanent failures surface immediately;
- at most ``max_in_flight`` provider calls run concurrently, regardless
  of how many worker threads call in.

Provider errors are raised as :class:`ProviderError` values that callers
catch per item; a failed item never corrupts the rest of a batch.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

logger = logging.getLogger("instrefine.gateway")

DEFAULT_CREDENTIAL_ENV = "OPENAI_API_KEY"


class ProviderError(Exception):
    """A provider call failed.

    ``transient`` distinguishes retryable conditions (timeouts, rate
    limits, 5xx) from permanent ones (bad credentials, malformed
    requests). The gateway retries only transient errors.
    """

    def __init__(self, message: str, *, transient: bool):
        super().__init__(message)
        self.transient = transient


@dataclass(frozen=True)
class PromptPair:
    """A system/user message pair for a chat completion."""

    system: str
    user: str

    def __post_init__(self) -> None:
        if not self.user:
            raise ValueError("user prompt must be non-empty")


@dataclass(frozen=True)
class ProviderConfig:
    """Connection and resilience settings for one provider endpoint.

    The credential is never stored in config files; ``credential_env``
    names the environment variable it is read from (default
    ``OPENAI_API_KEY``).
    """

    endpoint: str = "https://api.openai.com/v1"
    model_name: str = "gpt-4"
    embedding_model: str = "text-embedding-ada-002"
    credential_env: str = DEFAULT_CREDENTIAL_ENV
    max_retries: int = 3
    backoff_base: float = 0.5
    max_in_flight: int = 4
    request_timeout: float = 60.0

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.backoff_base < 0:
            raise ValueError("backoff_base must be >= 0")

    def credential(self) -> str:
        value = os.environ.get(self.credential_env, "")
        if not value:
            raise ProviderError(
                f"credential environment variable {self.credential_env!r} is not set",
                transient=False,
            )
        return value


@dataclass(frozen=True)
class EmbeddingMatrix:
    """n embedding rows aligned with n record ids.

    The dimension is whatever the provider reports (1536 for the common
    hosted models, configurable for the mock).
    """

    row_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ValueError("embedding values must be a 2-d matrix")
        if len(self.row_ids) != self.values.shape[0]:
            raise ValueError(
                f"{len(self.row_ids)} row ids for {self.values.shape[0]} rows"
            )
        if len(set(self.row_ids)) != len(self.row_ids):
            raise ValueError("row_ids must be unique")
        if self.values.size and not np.all(np.isfinite(self.values)):
            raise ValueError("embedding values must be finite")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> int:
        return self.values.shape[1]

    def reordered(self, ids: Sequence[str]) -> "EmbeddingMatrix":
        """Rows re-aligned to ``ids``; every id must be present."""
        index = {rid: i for i, rid in enumerate(self.row_ids)}
        missing = [rid for rid in ids if rid not in index]
        if missing:
            raise ValueError(f"embeddings missing for ids {missing[:5]}")
        rows = np.array([index[rid] for rid in ids], dtype=int)
        return EmbeddingMatrix(row_ids=tuple(ids), values=self.values[rows])


@dataclass(frozen=True)
class EmbedFailure:
    item_id: str
    error: ProviderError


@dataclass(frozen=True)
class EmbedBatchResult:
    """Successful rows (in input order) plus per-item failures."""

    matrix: EmbeddingMatrix
    failures: tuple[EmbedFailure, ...]


class ChatProvider(Protocol):
    """Minimal provider surface the gateway drives.

    ``name`` identifies the chat model and ``embedding_model_name`` the
    embedding model; both feed cache keys, so renaming a model naturally
    invalidates its cache entries.
    """

    name: str
    embedding_model_name: str
    embed_batch_size: int

    def complete(self, system: str, user: str) -> str: ...

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


class ResponseCache:
    """Content-addressed on-disk cache of provider responses.

    One entry per request digest, stored as JSON with minimal metadata.
    Writes go through a temp file + rename so concurrent writers can
    never leave a partial entry behind.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str):
        path = self._path(key)
        try:
            with path.open("r", encoding="utf-8") as handle:
                return json.load(handle)["response"]
        except FileNotFoundError:
            return None

    def put(self, key: str, response, model: str) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        entry = {"model": model, "created_at": time.time(), "response": response}
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                json.dump(entry, handle, ensure_ascii=False)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def request_key(kind: str, model: str, payload) -> str:
    """Cache key: digest of (operation kind, model, full request payload)."""
    blob = json.dumps([kind, model, payload], ensure_ascii=False, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class LlmGateway:
    """Cached, retried, concurrency-bounded front door to a provider.

    A single gateway instance is safe to share across threads; the
    in-flight semaphore is the enforcement point for the provider's
    rate budget.
    """

    def __init__(
        self,
        provider: ChatProvider,
        config: ProviderConfig,
        cache: ResponseCache | None = None,
    ):
        self.provider = provider
        self.config = config
        self.cache = cache
        self._gate = threading.Semaphore(config.max_in_flight)

    # -- retry core -----------------------------------------------------

    def _call_with_retries(self, fn, describe: str):
        last: ProviderError | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                delay = self.config.backoff_base * (2 ** (attempt - 1))
                if delay:
                    time.sleep(delay)
            try:
                with self._gate:
                    return fn()
            except ProviderError as exc:
                if not exc.transient:
                    raise
                last = exc
                logger.warning(
                    "%s failed (attempt %d/%d): %s",
                    describe,
                    attempt + 1,
                    self.config.max_retries + 1,
                    exc,
                )
        assert last is not None
        raise ProviderError(
            f"{describe}: retries exhausted after {self.config.max_retries + 1} "
            f"attempts: {last}",
            transient=True,
        )

    # -- chat -----------------------------------------------------------

    def chat_complete(self, prompt: PromptPair) -> str:
        """One chat completion, cached under (model, system, user)."""
        key = request_key(
            "chat", self.provider.name, {"system": prompt.system, "user": prompt.user}
        )
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return hit
        text = self._call_with_retries(
            lambda: self.provider.complete(prompt.system, prompt.user),
            describe="chat completion",
        )
        if self.cache is not None:
            self.cache.put(key, text, model=self.provider.name)
        return text

    def chat_complete_many(
        self, prompts: Sequence[PromptPair]
    ) -> list[str | ProviderError]:
        """Complete many prompts concurrently, preserving input order.

        Failures come back as :class:`ProviderError` values in the
        corresponding slots; successful items are unaffected by them.
        """
        if not prompts:
            return []

        def one(prompt: PromptPair):
            try:
                return self.chat_complete(prompt)
            except ProviderError as exc:
                return exc

        workers = min(self.config.max_in_flight, len(prompts))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, prompts))

    # -- embeddings -----------------------------------------------------

    def embed_batch(self, items: Sequence[tuple[str, str]]) -> EmbedBatchResult:
        """Embed (id, text) pairs; one matrix row per success, input order.

        Each text is cached individually under (embedding model, text),
        so a rerun is served entirely from cache. Provider failures are
        reported per item in ``failures``; the caller decides whether to
        skip or abort.
        """
        if not items:
            raise ValueError("embed_batch requires a non-empty item list")
        for item_id, text in items:
            if not text:
                raise ValueError(f"empty text for id {item_id!r}")

        model = self.provider.embedding_model_name
        vectors: dict[str, list[float]] = {}
        misses: list[str] = []
        for _, text in items:
            if text in vectors:
                continue
            if self.cache is not None:
                hit = self.cache.get(request_key("embed", model, text))
                if hit is not None:
                    vectors[text] = hit
                    continue
            vectors[text] = []  # placeholder; filled below
            misses.append(text)

        failed_texts: dict[str, ProviderError] = {}
        chunk_size = max(1, self.provider.embed_batch_size)
        chunks = [misses[i : i + chunk_size] for i in range(0, len(misses), chunk_size)]

        def embed_chunk(chunk: list[str]):
            try:
                rows = self._call_with_retries(
                    lambda: self.provider.embed(chunk), describe="embedding batch"
                )
                if len(rows) != len(chunk):
                    raise ProviderError(
                        f"provider returned {len(rows)} embeddings for "
                        f"{len(chunk)} texts",
                        transient=False,
                    )
                return chunk, rows, None
            except ProviderError as exc:
                return chunk, None, exc

        if chunks:
            workers = min(self.config.max_in_flight, len(chunks))
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(embed_chunk, chunks))
            for chunk, rows, error in results:
                if error is not None:
                    for text in chunk:
                        failed_texts[text] = error
                    continue
                for text, row in zip(chunk, rows):
                    vectors[text] = row
                    if self.cache is not None:
                        self.cache.put(request_key("embed", model, text), row, model)

        row_ids: list[str] = []
        rows: list[list[float]] = []
        failures: list[EmbedFailure] = []
        for item_id, text in items:
            if text in failed_texts:
                failures.append(EmbedFailure(item_id=item_id, error=failed_texts[text]))
                continue
            row_ids.append(item_id)
            rows.append(vectors[text])
        values = (
            np.array(rows, dtype=np.float64) if rows else np.empty((0, 0), dtype=np.float64)
        )
        matrix = EmbeddingMatrix(row_ids=tuple(row_ids), values=values)
        return EmbedBatchResult(matrix=matrix, failures=tuple(failures))


__all__ = [
    "DEFAULT_CREDENTIAL_ENV",
    "ProviderError",
    "PromptPair",
    "ProviderConfig",
    "EmbeddingMatrix",
    "EmbedFailure",
    "EmbedBatchResult",
    "ChatProvider",
    "ResponseCache",
    "LlmGateway",
    "request_key",
]
