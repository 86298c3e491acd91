import json
import logging

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from braid.economics import TokenUsage
from braid.gateway import (
    AuthError,
    ChatRequest,
    GatewayTimeout,
    HttpGateway,
    MissingUsage,
    ModelSpec,
    ProviderConfig,
    ProviderError,
    RateLimited,
    RetryPolicy,
    ScriptExhausted,
    ServerError,
    StubGateway,
    fingerprint,
)

NANO = ModelSpec.parse("gpt-5-nano@minimal")
REQ = ChatRequest(turns=(("user", "hi"),))


def test_spec_parse_and_label():
    spec = ModelSpec.parse("acme/gpt-5@medium")
    assert (spec.provider_id, spec.model_name, spec.reasoning_effort) == ("acme", "gpt-5", "medium")
    assert spec.label == "gpt-5-medium"
    assert ModelSpec.parse("gpt-4.1").label == "gpt-4.1"
    assert ModelSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ValueError):
        ModelSpec.parse("gpt-5@extreme")


def test_request_validation():
    with pytest.raises(ValueError):
        ChatRequest(turns=(("assistant", "x"),))
    with pytest.raises(ValueError):
        ChatRequest(turns=(("system", "x"), ("user", "y")))
    assert ChatRequest(turns=(("user", "q"),), system="s").messages()[0] == {"role": "system", "content": "s"}


@given(st.integers(1, 8), st.floats(0.01, 5), st.floats(1, 4), st.floats(0.1, 60))
def test_delays_nondecreasing_and_capped(attempts, base, mult, cap):
    d = RetryPolicy(max_attempts=attempts, base_delay=base, multiplier=mult, max_delay=cap).delays()
    assert len(d) == attempts - 1
    assert all(a <= b for a, b in zip(d, d[1:]))
    assert all(x <= cap for x in d)


def test_stub_resolution_order():
    key = fingerprint(NANO, REQ)
    stub = StubGateway(
        script={key: [{"text": "exact", "input_tokens": 1, "output_tokens": 2}],
                f"{NANO.label}:*": [{"text": "label"}], "*": [{"text": "any"}]},
        rules=[{"model": NANO.label, "contains": "hi", "response": {"text": "rule"}}],
    )
    texts = [stub.complete(NANO, REQ).text for _ in range(5)]
    assert texts == ["exact", "label", "any", "rule", "rule"]
    assert stub.calls == 5
    assert len(stub.history) == 5


def test_stub_exhausted():
    with pytest.raises(ScriptExhausted):
        StubGateway().complete(NANO, REQ)


def test_retry_then_success_records_sleeps():
    slept = []
    stub = StubGateway(script={"*": [{"error": "rate_limited"}, {"error": "server"}, {"text": "ok"}]},
                       sleep=slept.append)
    resp = stub.complete(NANO, REQ, RetryPolicy(max_attempts=4, base_delay=1, multiplier=2))
    assert resp.text == "ok"
    assert slept == [1, 2]
    assert stub.calls == 3


def test_retry_exhaustion_raises_last_error():
    stub = StubGateway(script={"*": [{"error": "timeout"}] * 5})
    with pytest.raises(GatewayTimeout):
        stub.complete(NANO, REQ, RetryPolicy(max_attempts=3))
    assert stub.calls == 3


@pytest.mark.parametrize("kind,exc", [("auth", AuthError), ("provider", ProviderError)])
def test_non_retryable_fail_fast(kind, exc):
    stub = StubGateway(script={"*": [{"error": kind}, {"text": "never"}]})
    with pytest.raises(exc):
        stub.complete(NANO, REQ)
    assert stub.calls == 1


# ---------------------------------------------------------------------------
# HTTP backend against an in-process transport


def _http(handler, adapter="openai", env=None):
    client = httpx.Client(transport=httpx.MockTransport(handler))
    providers = {"openai": ProviderConfig("openai", "https://example.test/v1", adapter)}
    return HttpGateway(providers, client=client, env={"OPENAI_API_KEY": "k"} if env is None else env,
                       sleep=lambda s: None)


def _ok(text="answer", usage=True):
    body = {"choices": [{"message": {"content": text}}]}
    if usage:
        body["usage"] = {"prompt_tokens": 11, "completion_tokens": 7}
    return httpx.Response(200, json=body)


def test_http_openai_body_and_usage():
    seen = {}

    def handler(request):
        seen["url"] = str(request.url)
        seen["auth"] = request.headers["authorization"]
        seen["body"] = json.loads(request.content)
        return _ok()

    gw = _http(handler)
    resp = gw.complete(NANO, ChatRequest(turns=(("user", "q"),), system="plan"))
    assert resp.text == "answer"
    assert resp.usage == TokenUsage(11, 7)
    assert seen["url"] == "https://example.test/v1/chat/completions"
    assert seen["auth"] == "Bearer k"
    assert seen["body"]["reasoning_effort"] == "minimal"
    assert seen["body"]["messages"][0] == {"role": "system", "content": "plan"}


def test_http_plain_chat_adapter_drops_effort(caplog):
    bodies = []

    def handler(request):
        bodies.append(json.loads(request.content))
        return _ok()

    gw = _http(handler, adapter="chat-completions")
    with caplog.at_level(logging.WARNING):
        gw.preflight([NANO])
    assert "reasoning-effort" in caplog.text
    gw.complete(NANO, REQ)
    assert "reasoning_effort" not in bodies[0]


def test_http_anthropic_adapter():
    def handler(request):
        body = json.loads(request.content)
        assert body["system"] == "plan"
        assert request.headers["x-api-key"] == "k"
        return httpx.Response(200, json={"content": [{"type": "text", "text": "hey"}],
                                         "usage": {"input_tokens": 3, "output_tokens": 4}})

    gw = _http(handler, adapter="anthropic")
    resp = gw.complete(ModelSpec("claude-x"), ChatRequest(turns=(("user", "q"),), system="plan"))
    assert (resp.text, resp.usage) == ("hey", TokenUsage(3, 4))


@pytest.mark.parametrize("status,exc,calls", [
    (401, AuthError, 1), (403, AuthError, 1), (400, ProviderError, 1),
    (429, RateLimited, 4), (503, ServerError, 4),
])
def test_http_status_mapping(status, exc, calls):
    count = []

    def handler(request):
        count.append(1)
        return httpx.Response(status, text="nope")

    with pytest.raises(exc):
        _http(handler).complete(NANO, REQ)
    assert len(count) == calls


def test_http_timeout_retried_then_success():
    attempts = []

    def handler(request):
        attempts.append(1)
        if len(attempts) < 3:
            raise httpx.ReadTimeout("slow", request=request)
        return _ok()

    assert _http(handler).complete(NANO, REQ).text == "answer"
    assert len(attempts) == 3


def test_http_missing_usage():
    with pytest.raises(MissingUsage):
        _http(lambda r: _ok(usage=False)).complete(NANO, REQ)


def test_http_missing_credentials_before_any_request():
    calls = []
    gw = _http(lambda r: calls.append(1) or _ok(), env={})
    with pytest.raises(AuthError, match="OPENAI_API_KEY"):
        gw.preflight([NANO])
    assert calls == []
