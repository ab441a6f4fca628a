#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

from unittest.mock import MagicMock

import pytest
import requests
from parameterized import parameterized

from reviewer.core.config import ProviderConfig
from reviewer.literals import (
    ProviderAuthError,
    ProviderKind,
    ProviderRejectedError,
    ProviderTimeoutError,
)
from reviewer.managers.prompt import build_prompt
from reviewer.managers.provider import (
    ChatCompletionsProvider,
    MockProvider,
    build_provider,
    call_provider,
)

CONFIG = ProviderConfig(max_retries=2, backoff_seconds=0)
REQUEST = build_prompt("src/add.py", "def add(a, b):\n    return a + b\n")


def response(status, body=None):
    mock = MagicMock()
    mock.status_code = status
    mock.json.return_value = body or {}
    return mock


def answer(text):
    return response(200, {"choices": [{"message": {"role": "assistant", "content": text}}]})


def adapter(*responses):
    session = MagicMock()
    session.post.side_effect = list(responses)
    return ChatCompletionsProvider(CONFIG, session=session), session


def test_single_user_message(api_key):
    provider, session = adapter(answer("  1. Documentation Defects: fine.  "))
    assert call_provider(REQUEST, CONFIG, provider) == "1. Documentation Defects: fine."
    _, kwargs = session.post.call_args
    assert kwargs["json"]["messages"] == [{"role": "user", "content": REQUEST.prompt_text}]
    assert kwargs["json"]["model"] == "gpt-4"
    assert kwargs["headers"]["Authorization"] == f"Bearer {api_key}"
    assert kwargs["timeout"] == CONFIG.timeout_seconds


@parameterized.expand([(401,), (403,)])
def test_auth_errors_are_not_retried(status):
    provider, session = adapter(response(status), answer("never"))
    with pytest.raises(ProviderAuthError):
        call_provider(REQUEST, CONFIG, provider)
    assert session.post.call_count == 1


def test_transient_errors_are_retried():
    provider, session = adapter(response(502), response(503), answer("ok"))
    assert call_provider(REQUEST, CONFIG, provider) == "ok"
    assert session.post.call_count == 3


def test_retries_exhausted():
    provider, session = adapter(
        requests.Timeout(), requests.ConnectionError(), response(429), answer("too late")
    )
    with pytest.raises(ProviderTimeoutError):
        call_provider(REQUEST, CONFIG, provider)
    assert session.post.call_count == 3


@parameterized.expand([(response(400),), (response(200, {"unexpected": True}),)])
def test_rejected(reply):
    provider, _ = adapter(reply)
    with pytest.raises(ProviderRejectedError):
        call_provider(REQUEST, CONFIG, provider)


def test_mock_is_deterministic():
    provider = build_provider(ProviderConfig(kind=ProviderKind.MOCK))
    assert isinstance(provider, MockProvider)
    first = call_provider(REQUEST, CONFIG, provider)
    assert first == provider.complete(REQUEST.prompt_text)
    assert first.splitlines()[0].startswith("1. Documentation Defects")
    assert len(first.splitlines()) == 8
    assert provider.credentials_present() and provider.credentials_authorized()


def test_build_provider_default():
    assert isinstance(build_provider(ProviderConfig()), ChatCompletionsProvider)
