"""Chat-completion client and a table-driven stub.

The HTTP client speaks the common ``/chat/completions`` JSON shape
(``messages`` in, ``choices[0].message.content`` out), so any compatible
provider works once its endpoint is configured.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

import httpx

log = logging.getLogger(__name__)

TRANSLATOR_TEMPERATURE = 0.0
GENERATOR_TEMPERATURE = 0.7


class LLMError(RuntimeError):
    kind = "llm_error"


class NetworkError(LLMError):
    kind = "network_error"


class ProviderError(LLMError):
    kind = "provider_error"

    def __init__(self, status: int, body: str):
        self.status = status
        super().__init__(f"provider returned HTTP {status}: {body[:200]}")


class LLMTimeout(LLMError):
    kind = "timeout"


class StubMiss(LLMError):
    kind = "stub_miss"


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user"):
            raise ValueError(f"unsupported role: {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple
    temperature: float = TRANSLATOR_TEMPERATURE
    model: str = ""
    max_tokens: int = 512

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        if not 0 <= self.temperature <= 2:
            raise ValueError("temperature must be within [0, 2]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    @classmethod
    def of(cls, system: str, user: str, **kw) -> "ChatRequest":
        return cls((Message("system", system), Message("user", user)), **kw)

    @property
    def last_user(self) -> str:
        for m in reversed(self.messages):
            if m.role == "user":
                return m.content
        return self.messages[-1].content

    def payload(self, default_model: str) -> dict:
        return {
            "model": self.model or default_model,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }


class ChatClient(Protocol):
    def complete(self, req: ChatRequest) -> str: ...


@dataclass
class ClientConfig:
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-3.5-turbo"
    api_key_env: str = "PROSLM_API_KEY"
    timeout: float = 30.0
    retries: int = 3
    backoff: float = 0.5
    credential: Optional[str] = field(default=None, repr=False)

    def resolve_credential(self) -> Optional[str]:
        return self.credential if self.credential is not None else os.environ.get(self.api_key_env)


def redact(text: str, secret: Optional[str]) -> str:
    if secret:
        text = text.replace(secret, "[REDACTED]")
    return text


class HTTPChatClient:
    def __init__(self, cfg: ClientConfig, transport: Optional[httpx.BaseTransport] = None, sleep=time.sleep):
        self.cfg = cfg
        self._http = httpx.Client(timeout=cfg.timeout, transport=transport)
        self._sleep = sleep

    def close(self):
        self._http.close()

    def _headers(self, key: Optional[str]) -> dict:
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, req: ChatRequest) -> str:
        key = self.cfg.resolve_credential()
        body = req.payload(self.cfg.model)
        log.debug("chat request to %s: %s", self.cfg.endpoint, redact(json.dumps(body), key))
        attempt = 0
        while True:
            attempt += 1
            try:
                resp = self._http.post(self.cfg.endpoint, json=body, headers=self._headers(key))
            except httpx.TimeoutException as exc:
                raise LLMTimeout(f"no response within {self.cfg.timeout}s") from exc
            except httpx.TransportError as exc:
                err: LLMError = NetworkError(redact(str(exc), key))
            else:
                if resp.status_code == 200:
                    text = _first_choice(resp)
                    log.debug("chat response: %s", redact(text, key))
                    return text
                err = ProviderError(resp.status_code, redact(resp.text, key))
                if resp.status_code != 429 and resp.status_code < 500:
                    raise err
            if attempt > self.cfg.retries:
                raise err
            delay = self.cfg.backoff * 2 ** (attempt - 1)
            log.warning("transient LLM failure (%s), retry %d in %.2fs", err.kind, attempt, delay)
            self._sleep(delay)


def _first_choice(resp: httpx.Response) -> str:
    try:
        return resp.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise ProviderError(resp.status_code, f"malformed completion: {resp.text}") from exc


class StubClient:
    """Deterministic client answering from an exact-match table.

    The key is the final user message of the request.
    """

    def __init__(self, pairs=()):
        table: dict[str, str] = {}
        for match, response in pairs:
            if match in table:
                raise ValueError(f"duplicate stub matcher: {match!r}")
            table[match] = response
        self.table = table
        self.calls: list[ChatRequest] = []
        self._lock = threading.Lock()

    def complete(self, req: ChatRequest) -> str:
        with self._lock:
            self.calls.append(req)
        try:
            return self.table[req.last_user]
        except KeyError:
            raise StubMiss(f"no stub response for: {req.last_user!r}") from None

    @classmethod
    def from_fixtures(cls, path) -> "StubClient":
        entries = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls((e["match"], e["response"]) for e in entries)


def stub_from_table(pairs) -> StubClient:
    return StubClient(pairs)
