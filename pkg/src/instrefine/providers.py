"""Provider implementations behind the gateway.

Two providers ship with the package:

- :class:`MockProvider` — a fully deterministic offline stand-in. Every
  completion and embedding is a pure function of (seed, prompt text), so
  pipelines run end-to-end with zero network access and reproduce
  byte-identically.
- :class:`HttpProvider` — a chat-completions-style HTTP client
  (system/user roles, ``/chat/completions`` and ``/embeddings`` routes).
  The concrete provider is configuration, not code: endpoint, model
  names, and the credential environment variable all live in
  :class:`~instrefine.gateway.ProviderConfig`.
"""

from __future__ import annotations

import hashlib
import json
from typing import Sequence

import httpx
import numpy as np

from .gateway import ProviderConfig, ProviderError

# Markers the mock uses to recognise what kind of call it is serving.
_SCORE_MARKER = "The maximum score is 100 points"
_REWRITE_MARKER = "#Instruction#"

_ANSWER_FILLER = (
    " The approach generalises: each constraint is checked against the"
    " requirements before the final result is assembled."
)


def _digest(seed: int, system: str, user: str) -> bytes:
    payload = f"{seed}\x1f{system}\x1f{user}".encode("utf-8")
    return hashlib.sha256(payload).digest()


class MockProvider:
    """Deterministic offline provider seeded by an integer.

    Completions are templated rewrites/answers carrying a hash-derived
    suffix (so repeated rewriting always yields fresh text), scoring
    calls return an integer first line in [60, 100], and embeddings are
    unit-norm pseudo-random vectors seeded by a digest of the text.
    """

    def __init__(self, seed: int, embed_dim: int = 1536):
        if embed_dim < 2:
            raise ValueError("embed_dim must be >= 2")
        self.seed = seed
        self.embed_dim = embed_dim
        self.name = f"mock-chat-{seed}"
        self.embedding_model_name = f"mock-embed-{seed}-d{embed_dim}"
        self.embed_batch_size = 256

    def complete(self, system: str, user: str) -> str:
        digest = _digest(self.seed, system, user)
        tag = digest[:4].hex()
        value = int.from_bytes(digest[4:8], "big")
        if _SCORE_MARKER in user:
            total = 60 + value % 41
            return f"{total}\nDeterministic rubric assessment {tag}."
        if _REWRITE_MARKER in user:
            instruction = self._extract_instruction(user)
            return (
                f"Rewritten: {instruction} Work through every intermediate step "
                f"and justify each decision. [v-{tag}]"
            )
        filler = _ANSWER_FILLER * (value % 4)
        return f"Mock answer [a-{tag}]: a worked solution follows.{filler}"

    @staticmethod
    def _extract_instruction(user: str) -> str:
        _, _, tail = user.rpartition(f"{_REWRITE_MARKER}\n")
        head, marker, _ = tail.partition("\n#Input#\n")
        return head if marker else tail

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        rows: list[list[float]] = []
        for text in texts:
            digest = hashlib.sha256(f"{self.seed}\x1f{text}".encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
            vector = rng.standard_normal(self.embed_dim)
            norm = float(np.linalg.norm(vector))
            if norm < 1e-12:
                vector[0] = 1.0
                norm = 1.0
            rows.append((vector / norm).tolist())
        return rows


def mock_provider(seed: int, embed_dim: int = 1536) -> MockProvider:
    """Build the deterministic offline provider."""
    return MockProvider(seed=seed, embed_dim=embed_dim)


class HttpProvider:
    """Chat-completions-style HTTP provider.

    Speaks the common JSON wire shape: POST ``chat/completions`` with
    system/user messages, POST ``embeddings`` with a text batch. Rate
    limits, 5xx responses, and timeouts surface as transient
    :class:`ProviderError`; other 4xx responses are permanent.
    """

    def __init__(self, config: ProviderConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self.name = config.model_name
        self.embedding_model_name = config.embedding_model
        self.embed_batch_size = 128
        base = config.endpoint.rstrip("/") + "/"
        self._client = httpx.Client(
            base_url=base,
            timeout=config.request_timeout,
            headers={"Authorization": f"Bearer {config.credential()}"},
            transport=transport,
        )

    def complete(self, system: str, user: str) -> str:
        messages = []
        if system:
            messages.append({"role": "system", "content": system})
        messages.append({"role": "user", "content": user})
        body = self._post("chat/completions", {"model": self.name, "messages": messages})
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(
                f"malformed chat completion response: {exc!r}", transient=False
            ) from exc

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        body = self._post(
            "embeddings", {"model": self.embedding_model_name, "input": list(texts)}
        )
        try:
            data = sorted(body["data"], key=lambda item: item["index"])
            return [item["embedding"] for item in data]
        except (KeyError, TypeError) as exc:
            raise ProviderError(
                f"malformed embedding response: {exc!r}", transient=False
            ) from exc

    def _post(self, path: str, payload: dict) -> dict:
        try:
            response = self._client.post(path, json=payload)
        except httpx.TimeoutException as exc:
            raise ProviderError(f"request timed out: {exc}", transient=True) from exc
        except httpx.HTTPError as exc:
            raise ProviderError(f"connection error: {exc}", transient=True) from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise ProviderError(
                f"HTTP {response.status_code}: {response.text[:200]}", transient=True
            )
        if response.status_code >= 400:
            raise ProviderError(
                f"HTTP {response.status_code}: {response.text[:200]}", transient=False
            )
        try:
            return response.json()
        except json.JSONDecodeError as exc:
            raise ProviderError(f"non-JSON response body: {exc}", transient=False) from exc


__all__ = ["MockProvider", "mock_provider", "HttpProvider"]
