"""Chat-completion client with batching, retries, and record/replay caching.

Three backends share one interface:

* ``http``   -- POST to a chat-completions endpoint, nothing persisted
* ``record`` -- like http, but every (request_key, response) pair is written
  to a JSONL cache; cached keys are served without touching the network
* ``replay`` -- serve exclusively from the cache; a miss is an error and no
  network I/O ever happens

The request key hashes the fully rendered messages plus the generation
parameters, canonically serialized, so it is stable across runs and
platforms and any prompt edit invalidates stale cache entries.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import requests

BACKENDS = ("http", "replay", "record")
API_KEY_VARS = ("ANNOFORGE_API_KEY", "OPENAI_API_KEY")
RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


class LLMError(Exception):
    pass


class ReplayCacheMissError(LLMError):
    def __init__(self, request_key: str) -> None:
        self.request_key = request_key
        super().__init__(f"no cached response for request_key {request_key}")


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.7
    top_p: float = 0.95
    max_new_tokens: int = 1024
    model_name: str = "default"

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be positive")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    params: GenerationParams = field(default_factory=GenerationParams)

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.messages[0].role == "assistant":
            raise ValueError("first message must be system or user")

    @property
    def request_key(self) -> str:
        payload = {
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "params": {
                "temperature": self.params.temperature,
                "top_p": self.params.top_p,
                "max_new_tokens": self.params.max_new_tokens,
                "model_name": self.params.model_name,
            },
        }
        canonical = json.dumps(payload, sort_keys=True, ensure_ascii=True,
                               separators=(",", ":"))
        return hashlib.sha256(canonical.encode("ascii")).hexdigest()


@dataclass
class ChatResponse:
    text: str
    finish_reason: str  # stop | length | error
    usage: dict | None = None
    error: str | None = None


def user_request(content: str, params: GenerationParams | None = None,
                 system: str | None = None) -> ChatRequest:
    """Convenience constructor for the common single-turn request."""
    messages = []
    if system is not None:
        messages.append(ChatMessage(role="system", content=system))
    messages.append(ChatMessage(role="user", content=content))
    return ChatRequest(messages=tuple(messages),
                       params=params or GenerationParams())


class ReplayCache:
    """JSONL-backed response cache; concurrent reads, serialized appends."""

    def __init__(self, path: str | Path, must_exist: bool = False) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, tuple[str, str]] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    record = json.loads(line)
                    self._entries[record["request_key"]] = (
                        record["response_text"], record["finish_reason"])
        elif must_exist:
            raise FileNotFoundError(f"replay cache not found: {self.path}")

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> tuple[str, str]:
        if key not in self._entries:
            raise ReplayCacheMissError(key)
        return self._entries[key]

    def put(self, key: str, text: str, finish_reason: str) -> None:
        line = json.dumps({"request_key": key, "response_text": text,
                           "finish_reason": finish_reason}, ensure_ascii=False)
        with self._lock:
            self._entries[key] = (text, finish_reason)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")


class LLMClient:
    """Uniform access to a chat-completion model; shareable across threads."""

    def __init__(self, backend: str, base_url: str | None = None,
                 cache_path: str | Path | None = None,
                 params: GenerationParams | None = None,
                 timeout: float = 120.0, max_attempts: int = 3,
                 backoff_base: float = 1.0) -> None:
        if backend not in BACKENDS:
            raise ValueError(f"unknown backend {backend!r}")
        if backend in ("http", "record") and not base_url:
            raise ValueError(f"backend {backend!r} needs a base_url")
        if backend in ("replay", "record") and not cache_path:
            raise ValueError(f"backend {backend!r} needs a cache_path")
        self.backend = backend
        self.base_url = base_url.rstrip("/") if base_url else None
        self.params = params or GenerationParams()
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.cache = (ReplayCache(cache_path, must_exist=backend == "replay")
                      if cache_path else None)

    def complete(self, request: ChatRequest) -> ChatResponse:
        """Run one request; raises LLMError when no response can be produced."""
        key = request.request_key
        if self.backend == "replay":
            text, finish_reason = self.cache.get(key)
            return ChatResponse(text=text, finish_reason=finish_reason)
        if self.backend == "record" and key in self.cache:
            text, finish_reason = self.cache.get(key)
            return ChatResponse(text=text, finish_reason=finish_reason)
        response = self._http_call(request)
        if self.backend == "record":
            self.cache.put(key, response.text, response.finish_reason)
        return response

    def complete_batch(self, requests_: list[ChatRequest],
                       parallelism: int = 1) -> list[ChatResponse]:
        """Run many requests with at most ``parallelism`` in flight.

        Responses align positionally with the inputs; a failing slot yields
        a finish_reason="error" response instead of aborting the batch.
        """
        if parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if not requests_:
            return []

        def run(req: ChatRequest) -> ChatResponse:
            try:
                return self.complete(req)
            except Exception as exc:
                return ChatResponse(text="", finish_reason="error", error=str(exc))

        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(run, requests_))

    def _http_call(self, request: ChatRequest) -> ChatResponse:
        body = {
            "model": request.params.model_name,
            "messages": [{"role": m.role, "content": m.content}
                         for m in request.messages],
            "temperature": request.params.temperature,
            "top_p": request.params.top_p,
            "max_tokens": request.params.max_new_tokens,
        }
        headers = {"Content-Type": "application/json"}
        api_key = next((os.environ[v] for v in API_KEY_VARS if os.environ.get(v)), None)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        url = f"{self.base_url}/v1/chat/completions"
        last_error = "no attempts made"
        for attempt in range(1, self.max_attempts + 1):
            try:
                resp = requests.post(url, json=body, headers=headers,
                                     timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = f"transport error: {exc}"
            else:
                if resp.status_code == 200:
                    return self._parse_response(resp)
                last_error = f"HTTP {resp.status_code}: {resp.text[:200]}"
                if resp.status_code not in RETRYABLE_STATUS:
                    raise LLMError(last_error)
            if attempt < self.max_attempts:
                time.sleep(self.backoff_base * 2 ** (attempt - 1))
        raise LLMError(f"giving up after {self.max_attempts} attempts; {last_error}")

    @staticmethod
    def _parse_response(resp: requests.Response) -> ChatResponse:
        try:
            payload = resp.json()
            choice = payload["choices"][0]
            text = choice["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise LLMError(f"malformed endpoint response: {exc}") from exc
        finish_reason = choice.get("finish_reason")
        return ChatResponse(
            text=text,
            finish_reason="length" if finish_reason == "length" else "stop",
            usage=payload.get("usage"),
        )
