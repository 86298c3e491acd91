"""Chat-completion access with exact usage capture.

Two backends share one retry/concurrency shell:

* :class:`HttpGateway` talks to chat-completions style HTTP endpoints through a
  small per-provider adapter table.
* :class:`StubGateway` replays scripted responses keyed by request fingerprint,
  for offline tests and dry runs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Mapping

import httpx

from .economics import TokenUsage

log = logging.getLogger(__name__)

EFFORTS = ("none", "minimal", "low", "medium", "high", "not-applicable")


class GatewayError(RuntimeError):
    retryable = False
    kind = "gateway_error"


class AuthError(GatewayError):
    kind = "auth_error"


class RateLimited(GatewayError):
    retryable = True
    kind = "rate_limited"


class GatewayTimeout(GatewayError):
    retryable = True
    kind = "timeout"


class ProviderError(GatewayError):
    kind = "provider_error"

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message if status is None else f"HTTP {status}: {message}")
        self.status = status


class ServerError(ProviderError):
    retryable = True
    kind = "server_error"


class MissingUsage(ProviderError):
    kind = "missing_usage"


class ScriptExhausted(GatewayError):
    kind = "script_exhausted"


@dataclass(frozen=True)
class ModelSpec:
    model_name: str
    provider_id: str = "openai"
    reasoning_effort: str = "not-applicable"
    temperature: float | None = None
    max_output_tokens: int | None = None
    display: str | None = None

    def __post_init__(self):
        if not self.model_name:
            raise ValueError("model_name must be nonempty")
        if self.reasoning_effort not in EFFORTS:
            raise ValueError(f"reasoning_effort must be one of {EFFORTS}")

    @property
    def label(self) -> str:
        """Table label, e.g. ``gpt-5-nano-minimal`` or ``gpt-4.1``."""
        if self.display:
            return self.display
        if self.reasoning_effort == "not-applicable":
            return self.model_name
        return f"{self.model_name}-{self.reasoning_effort}"

    @classmethod
    def parse(cls, text: str) -> "ModelSpec":
        """Parse ``[provider/]model[@effort]``."""
        text = text.strip()
        provider = "openai"
        effort = "not-applicable"
        if "/" in text:
            provider, text = text.split("/", 1)
        if "@" in text:
            text, effort = text.rsplit("@", 1)
        return cls(model_name=text, provider_id=provider, reasoning_effort=effort)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any] | str) -> "ModelSpec":
        if isinstance(d, str):
            return cls.parse(d)
        spec = cls(
            model_name=d["model"] if "model" in d else d["model_name"],
            provider_id=d.get("provider", d.get("provider_id", "openai")),
            reasoning_effort=d.get("reasoning_effort", "not-applicable"),
            temperature=d.get("temperature"),
            max_output_tokens=d.get("max_output_tokens"),
        )
        # a label equal to the derived one is not an override
        label = d.get("label")
        return spec if label in (None, spec.label) else replace(spec, display=label)

    def to_dict(self) -> dict:
        return {
            "provider": self.provider_id,
            "model": self.model_name,
            "reasoning_effort": self.reasoning_effort,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "label": self.label,
        }


@dataclass(frozen=True)
class ChatRequest:
    turns: tuple[tuple[str, str], ...]
    system: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple((r, t) for r, t in self.turns))
        if not any(role == "user" for role, _ in self.turns):
            raise ValueError("a chat request needs at least one user turn")
        for role, _ in self.turns:
            if role not in ("user", "assistant"):
                raise ValueError(f"unsupported role {role!r}")

    def messages(self) -> list[dict[str, str]]:
        out = []
        if self.system is not None:
            out.append({"role": "system", "content": self.system})
        out.extend({"role": r, "content": t} for r, t in self.turns)
        return out


def fingerprint(spec: ModelSpec, request: ChatRequest) -> str:
    blob = json.dumps(request.messages(), sort_keys=True, ensure_ascii=False)
    return f"{spec.label}:{hashlib.sha256(blob.encode()).hexdigest()}"


@dataclass(frozen=True)
class ChatResponse:
    text: str
    usage: TokenUsage
    latency: float = 0.0


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 4
    base_delay: float = 1.0
    multiplier: float = 2.0
    max_delay: float = 30.0
    timeout: float = 120.0

    def delays(self) -> list[float]:
        """Sleep before each retry; nondecreasing and capped."""
        out = []
        d = self.base_delay
        for _ in range(max(self.max_attempts - 1, 0)):
            out.append(min(d, self.max_delay))
            d *= self.multiplier
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, Any] | None) -> "RetryPolicy":
        return cls(**(d or {}))


class Gateway:
    """Retry and concurrency shell; subclasses implement :meth:`_send`."""

    def __init__(self, concurrency: int = 8, sleep: Callable[[float], None] = time.sleep):
        self._slots = threading.BoundedSemaphore(max(concurrency, 1))
        self._sleep = sleep
        self._lock = threading.Lock()
        self.calls = 0

    def preflight(self, specs: Iterable[ModelSpec]) -> None:
        pass

    def _send(self, spec: ModelSpec, request: ChatRequest, timeout: float) -> ChatResponse:
        raise NotImplementedError

    def complete(self, spec: ModelSpec, request: ChatRequest,
                 policy: RetryPolicy = RetryPolicy()) -> ChatResponse:
        delays = policy.delays()
        attempt = 0
        while True:
            with self._slots:
                with self._lock:
                    self.calls += 1
                started = time.monotonic()
                try:
                    response = self._send(spec, request, policy.timeout)
                except GatewayError as exc:
                    if not exc.retryable or attempt >= len(delays):
                        raise
                    log.warning("%s on %s (attempt %d), retrying in %.1fs",
                                exc.kind, spec.label, attempt + 1, delays[attempt])
                else:
                    if response.latency:
                        return response
                    return ChatResponse(response.text, response.usage, time.monotonic() - started)
            self._sleep(delays[attempt])
            attempt += 1


# ---------------------------------------------------------------------------
# stub backend

_ERRORS = {
    "auth": lambda e: AuthError(e.get("message", "scripted auth failure")),
    "rate_limited": lambda e: RateLimited(e.get("message", "scripted rate limit")),
    "timeout": lambda e: GatewayTimeout(e.get("message", "scripted timeout")),
    "server": lambda e: ServerError(e.get("message", "scripted server error"), e.get("status", 500)),
    "provider": lambda e: ProviderError(e.get("message", "scripted provider error"), e.get("status", 400)),
}


def _scripted(entry: Mapping[str, Any]) -> ChatResponse:
    if "error" in entry:
        kind = entry["error"]
        raise _ERRORS[kind](entry)
    return ChatResponse(
        text=entry["text"],
        usage=TokenUsage(int(entry.get("input_tokens", 0)), int(entry.get("output_tokens", 0))),
    )


class StubGateway(Gateway):
    """Deterministic offline backend.

    Resolution order per request: exact fingerprint queue, then ``<label>:*``
    queue, then ``*`` queue, then the first matching rule, then ``responder``.
    Queued entries are consumed; rules and the responder are reusable.
    """

    def __init__(self, script: Mapping[str, list] | None = None,
                 rules: list[Mapping[str, Any]] | None = None,
                 responder: Callable[[ModelSpec, ChatRequest], Mapping | ChatResponse] | None = None,
                 concurrency: int = 8, sleep: Callable[[float], None] = lambda s: None):
        super().__init__(concurrency=concurrency, sleep=sleep)
        self.queues = {k: deque(v) for k, v in (script or {}).items()}
        self.rules = list(rules or [])
        self.responder = responder
        self.history: list[tuple[ModelSpec, ChatRequest]] = []
        self._script_lock = threading.Lock()

    @classmethod
    def from_file(cls, path, **kwargs) -> "StubGateway":
        with open(path) as fh:
            data = json.load(fh)
        return cls(script=data.get("responses"), rules=data.get("rules"), **kwargs)

    def _send(self, spec: ModelSpec, request: ChatRequest, timeout: float) -> ChatResponse:
        key = fingerprint(spec, request)
        with self._script_lock:
            self.history.append((spec, request))
            for k in (key, f"{spec.label}:*", "*"):
                q = self.queues.get(k)
                if q:
                    return _scripted(q.popleft())
            rendered = "\n".join(m["content"] for m in request.messages())
            for rule in self.rules:
                if rule.get("model", "*") not in ("*", spec.label, spec.model_name):
                    continue
                if rule.get("contains") and rule["contains"] not in rendered:
                    continue
                return _scripted(rule["response"])
        if self.responder is not None:
            out = self.responder(spec, request)
            return out if isinstance(out, ChatResponse) else _scripted(out)
        raise ScriptExhausted(f"no scripted response for {key}")


def register_stub(script: Mapping[str, list] | None = None, **kwargs) -> StubGateway:
    return StubGateway(script=script, **kwargs)


# ---------------------------------------------------------------------------
# HTTP backend


@dataclass(frozen=True)
class ProviderConfig:
    provider_id: str
    base_url: str = "https://api.openai.com/v1"
    adapter: str = "openai"
    api_key_env: str | None = None

    @property
    def key_env(self) -> str:
        return self.api_key_env or f"{self.provider_id.upper().replace('-', '_')}_API_KEY"

    @classmethod
    def from_dict(cls, provider_id: str, d: Mapping[str, Any]) -> "ProviderConfig":
        return cls(provider_id=provider_id, base_url=d.get("base_url", cls.base_url),
                   adapter=d.get("adapter", "openai"), api_key_env=d.get("api_key_env"))


def _openai_body(spec: ModelSpec, request: ChatRequest, reasoning: bool) -> dict:
    body: dict[str, Any] = {"model": spec.model_name, "messages": request.messages()}
    if spec.temperature is not None:
        body["temperature"] = spec.temperature
    if spec.max_output_tokens is not None:
        body["max_completion_tokens" if reasoning else "max_tokens"] = spec.max_output_tokens
    if reasoning and spec.reasoning_effort != "not-applicable":
        body["reasoning_effort"] = spec.reasoning_effort
    return body


def _openai_parse(payload: Mapping[str, Any]) -> tuple[str, TokenUsage]:
    try:
        text = payload["choices"][0]["message"]["content"] or ""
    except (KeyError, IndexError, TypeError):
        raise ProviderError("response has no choices[0].message.content") from None
    usage = payload.get("usage") or {}
    if "prompt_tokens" not in usage or "completion_tokens" not in usage:
        raise MissingUsage("provider response carries no token usage")
    return text, TokenUsage(int(usage["prompt_tokens"]), int(usage["completion_tokens"]))


def _anthropic_body(spec: ModelSpec, request: ChatRequest, reasoning: bool) -> dict:
    body: dict[str, Any] = {
        "model": spec.model_name,
        "messages": [{"role": r, "content": t} for r, t in request.turns],
        "max_tokens": spec.max_output_tokens or 4096,
    }
    if request.system is not None:
        body["system"] = request.system
    if spec.temperature is not None:
        body["temperature"] = spec.temperature
    return body


def _anthropic_parse(payload: Mapping[str, Any]) -> tuple[str, TokenUsage]:
    blocks = payload.get("content")
    if not isinstance(blocks, list):
        raise ProviderError("response has no content blocks")
    text = "".join(b.get("text", "") for b in blocks if b.get("type") == "text")
    usage = payload.get("usage") or {}
    if "input_tokens" not in usage or "output_tokens" not in usage:
        raise MissingUsage("provider response carries no token usage")
    return text, TokenUsage(int(usage["input_tokens"]), int(usage["output_tokens"]))


@dataclass(frozen=True)
class Adapter:
    path: str
    build: Callable[[ModelSpec, ChatRequest, bool], dict]
    parse: Callable[[Mapping[str, Any]], tuple[str, TokenUsage]]
    headers: Callable[[str], dict]
    reasoning: bool


ADAPTERS: dict[str, Adapter] = {
    "openai": Adapter("/chat/completions", _openai_body, _openai_parse,
                      lambda key: {"Authorization": f"Bearer {key}"}, reasoning=True),
    "chat-completions": Adapter("/chat/completions", _openai_body, _openai_parse,
                                lambda key: {"Authorization": f"Bearer {key}"}, reasoning=False),
    "anthropic": Adapter("/messages", _anthropic_body, _anthropic_parse,
                         lambda key: {"x-api-key": key, "anthropic-version": "2023-06-01"},
                         reasoning=False),
}


class HttpGateway(Gateway):
    def __init__(self, providers: Mapping[str, ProviderConfig], concurrency: int = 8,
                 client: httpx.Client | None = None, env: Mapping[str, str] | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        super().__init__(concurrency=concurrency, sleep=sleep)
        self.providers = dict(providers)
        self.env = os.environ if env is None else env
        self.client = client or httpx.Client()
        for p in self.providers.values():
            if p.adapter not in ADAPTERS:
                raise ValueError(f"provider {p.provider_id!r}: unknown adapter {p.adapter!r}")

    def _credentials(self, provider_id: str) -> tuple[ProviderConfig, str]:
        provider = self.providers.get(provider_id)
        if provider is None:
            raise AuthError(f"provider {provider_id!r} is not configured")
        key = self.env.get(provider.key_env, "")
        if not key:
            raise AuthError(f"missing credentials: set {provider.key_env}")
        return provider, key

    def preflight(self, specs: Iterable[ModelSpec]) -> None:
        warned = set()
        for spec in specs:
            provider, _ = self._credentials(spec.provider_id)
            adapter = ADAPTERS[provider.adapter]
            if (spec.reasoning_effort != "not-applicable" and not adapter.reasoning
                    and spec.label not in warned):
                warned.add(spec.label)
                log.warning("adapter %r has no reasoning-effort control; dropping %r for %s",
                            provider.adapter, spec.reasoning_effort, spec.model_name)

    def _send(self, spec: ModelSpec, request: ChatRequest, timeout: float) -> ChatResponse:
        provider, key = self._credentials(spec.provider_id)
        adapter = ADAPTERS[provider.adapter]
        url = provider.base_url.rstrip("/") + adapter.path
        started = time.monotonic()
        try:
            resp = self.client.post(url, json=adapter.build(spec, request, adapter.reasoning),
                                    headers=adapter.headers(key), timeout=timeout)
        except httpx.TimeoutException as exc:
            raise GatewayTimeout(str(exc)) from exc
        except httpx.TransportError as exc:
            raise ServerError(f"transport failure: {exc}") from exc
        latency = time.monotonic() - started
        if resp.status_code in (401, 403):
            raise AuthError(f"HTTP {resp.status_code} from {provider.provider_id}")
        if resp.status_code == 429:
            raise RateLimited(f"HTTP 429 from {provider.provider_id}")
        if resp.status_code >= 500:
            raise ServerError(resp.text[:200], resp.status_code)
        if resp.status_code >= 400:
            raise ProviderError(resp.text[:200], resp.status_code)
        try:
            payload = resp.json()
        except ValueError:
            raise ProviderError("response body is not JSON", resp.status_code) from None
        text, usage = adapter.parse(payload)
        return ChatResponse(text, usage, latency)
