"""Chat backends: an HTTP chat-completions client and a replay store.

The replay store maps ``sha256(schema_name + "\\x00" + block_text)`` to the
verbatim response text, so the whole LLM path can run with no model.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

import requests

MAX_TOKENS_CAP = 8192
ENDPOINT_ENV = "INTERVIEW_IE_CHAT_ENDPOINT"


class BackendError(RuntimeError):
    pass


class MissingReplayError(BackendError):
    def __init__(self, key: str, schema_name: str):
        super().__init__(f"no replay entry {key} for schema {schema_name!r}")
        self.key = key


class TruncationError(BackendError):
    pass


class BackendTimeout(BackendError):
    pass


@dataclass(frozen=True)
class ChatBackendConfig:
    kind: str  # "http_endpoint" | "replay_file"
    location: str  # endpoint URL or replay path
    model: str = "default"
    temperature: float = 0.0
    max_tokens: int = MAX_TOKENS_CAP
    request_timeout: float = 120.0
    max_parallel_requests: int = 1
    # forward the JSON schema as response_format (endpoint-side constrained decoding)
    constrained: bool = False

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise BackendError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if self.kind not in ("http_endpoint", "replay_file"):
            out.append(f"unknown chat backend kind {self.kind!r}")
        if self.temperature != 0:
            out.append("temperature must be 0")
        if not 0 < self.max_tokens <= MAX_TOKENS_CAP:
            out.append(f"max_tokens must be in 1..{MAX_TOKENS_CAP}")
        if self.request_timeout <= 0:
            out.append("request_timeout must be positive")
        if self.max_parallel_requests < 1:
            out.append("max_parallel_requests must be at least 1")
        if not self.location:
            out.append("chat backend needs an endpoint address or replay path")
        return out

    @classmethod
    def replay(cls, path: str | Path, **kw) -> "ChatBackendConfig":
        return cls("replay_file", str(path), **kw)

    @classmethod
    def http(cls, endpoint: Optional[str] = None, **kw) -> "ChatBackendConfig":
        endpoint = endpoint or os.environ.get(ENDPOINT_ENV, "")
        return cls("http_endpoint", endpoint, **kw)


def replay_key(schema_name: str, block_text: str) -> str:
    return hashlib.sha256(f"{schema_name}\x00{block_text}".encode("utf-8")).hexdigest()


def approx_tokens(text: str) -> int:
    return len(re.findall(r"\w+|[^\w\s]", text))


class ChatBackend(Protocol):
    def complete(self, prompt: str, schema_name: str, block_text: str,
                 json_schema: Optional[dict] = None) -> str: ...


class ReplayBackend:
    """Read-only and safe to share between threads."""

    def __init__(self, path: str | Path, max_tokens: int = MAX_TOKENS_CAP):
        self.path = Path(path)
        self.max_tokens = max_tokens
        try:
            data = json.loads(self.path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise BackendError(f"cannot read replay file {self.path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise BackendError(f"replay file {self.path} is not valid JSON: {exc.msg}") from None
        if not isinstance(data, dict) or not all(isinstance(v, str) for v in data.values()):
            raise BackendError(f"replay file {self.path} must map hex keys to response strings")
        self._store = dict(data)

    def __len__(self):
        return len(self._store)

    def complete(self, prompt, schema_name, block_text, json_schema=None) -> str:
        key = replay_key(schema_name, block_text)
        if key not in self._store:
            raise MissingReplayError(key, schema_name)
        text = self._store[key]
        if approx_tokens(text) > self.max_tokens:
            raise TruncationError(f"replayed response {key} exceeds max_tokens={self.max_tokens}")
        return text


class HttpBackend:
    def __init__(self, cfg: ChatBackendConfig):
        if not cfg.location.startswith(("http://", "https://")):
            raise BackendError(f"chat endpoint {cfg.location!r} is not an http(s) URL")
        self.cfg = cfg
        self._local = threading.local()

    def _session(self) -> requests.Session:
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def complete(self, prompt, schema_name, block_text, json_schema=None) -> str:
        payload = {"model": self.cfg.model,
                   "messages": [{"role": "user", "content": prompt}],
                   "temperature": 0, "max_tokens": self.cfg.max_tokens}
        if self.cfg.constrained and json_schema is not None:
            payload["response_format"] = {"type": "json_schema", "json_schema": {
                "name": schema_name, "schema": {"type": "array", "items": json_schema}}}
        try:
            resp = self._session().post(self.cfg.location, json=payload, timeout=self.cfg.request_timeout)
        except requests.Timeout:
            raise BackendTimeout(f"chat endpoint timed out after {self.cfg.request_timeout}s") from None
        except requests.RequestException as exc:
            raise BackendError(f"chat endpoint request failed: {exc}") from None
        if resp.status_code != 200:
            raise BackendError(f"chat endpoint returned HTTP {resp.status_code}")
        try:
            choice = resp.json()["choices"][0]
            text = choice["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise BackendError("chat endpoint returned an unexpected payload") from None
        if choice.get("finish_reason") == "length":
            raise TruncationError(f"response truncated at max_tokens={self.cfg.max_tokens}")
        return text or ""


def make_backend(cfg: ChatBackendConfig) -> ChatBackend:
    if cfg.kind == "replay_file":
        return ReplayBackend(cfg.location, cfg.max_tokens)
    return HttpBackend(cfg)


def query_model(prompt: str, backend: ChatBackend | ChatBackendConfig, schema_name: str,
                block_text: str, json_schema: Optional[dict] = None) -> str:
    if isinstance(backend, ChatBackendConfig):
        backend = make_backend(backend)
    return backend.complete(prompt, schema_name, block_text, json_schema)
