# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""LLM provider adapters.

The provider is an external black box behind `ProviderAdapter`. Two adapters ship:
a chat-completions HTTP client and a deterministic mock used by the tests and the
offline demo. The whole prompt is sent as one user message.
"""

import hashlib
import logging
from abc import ABC, abstractmethod

import requests
from overrides import override
from tenacity import (
    Retrying,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from reviewer.core.config import ProviderConfig
from reviewer.core.models import ReviewRequest
from reviewer.literals import (
    ProviderAuthError,
    ProviderError,
    ProviderKind,
    ProviderRejectedError,
    ProviderTimeoutError,
    ProviderTransientError,
)

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = {408, 409, 425, 429}
MAX_BACKOFF_SECONDS = 30


class ProviderAdapter(ABC):
    """Interface of an LLM provider."""

    def __init__(self, config: ProviderConfig):
        self.config = config

    @abstractmethod
    def complete(self, prompt: str) -> str:
        """Send one prompt and return the completion text.

        Raises:
            ProviderTransientError: on retryable failures.
            ProviderError: on any other failure.
        """
        ...

    def credentials_present(self) -> bool:
        """The key is available."""
        return self.config.credentials_present()

    def credentials_authorized(self) -> bool:
        """The key looks usable."""
        return self.config.credentials_authorized()


class ChatCompletionsProvider(ProviderAdapter):
    """OpenAI-compatible chat-completions endpoint."""

    def __init__(self, config: ProviderConfig, session: requests.Session | None = None):
        super().__init__(config)
        self.session = session or requests.Session()

    @override
    def complete(self, prompt: str) -> str:
        """Post the prompt as a single user message."""
        payload = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
        }
        headers = {
            "Authorization": f"Bearer {self.config.api_key() or ''}",
            "Content-Type": "application/json",
        }
        try:
            response = self.session.post(
                self.config.endpoint_url,
                json=payload,
                headers=headers,
                timeout=self.config.timeout_seconds,
            )
        except requests.Timeout as e:
            raise ProviderTransientError(f"timeout after {self.config.timeout_seconds}s") from e
        except requests.ConnectionError as e:
            raise ProviderTransientError(f"connection error: {type(e).__name__}") from e

        status = response.status_code
        if status in (401, 403):
            raise ProviderAuthError(f"provider refused the credentials (HTTP {status})")
        if status >= 500 or status in RETRYABLE_STATUS:
            raise ProviderTransientError(f"provider answered HTTP {status}")
        if status >= 400:
            raise ProviderRejectedError(f"provider rejected the request (HTTP {status})")

        try:
            return str(response.json()["choices"][0]["message"]["content"]).strip()
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise ProviderRejectedError(f"unexpected provider response: {e}") from e


class MockProvider(ProviderAdapter):
    """Deterministic provider: a checklist-shaped answer keyed by the payload hash."""

    def __init__(self, config: ProviderConfig | None = None):
        super().__init__(config or ProviderConfig(kind=ProviderKind.MOCK))
        self.calls: list[str] = []

    @override
    def complete(self, prompt: str) -> str:
        """Answer with one numbered entry per checklist category."""
        self.calls.append(prompt)
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:12]
        return "\n".join(
            [
                f"1. Documentation Defects: names and comments look consistent (ref {digest}).",
                "2. Visual Representation Defects: no bracket, indentation or long-line issues found.",
                "3. Structure Defects: no dead or duplicated code found.",
                "4. New Functionality: no standard method replacements suggested.",
                "5. Resource Defects: variables are initialised before use.",
                "6. Check Defects: validate user input at the boundaries.",
                "7. Interface Defects: parameters match their call sites.",
                "8. Logic Defects: no incorrect logic or performance issues found.",
            ]
        )

    @override
    def credentials_present(self) -> bool:
        """The mock needs no key."""
        return True

    @override
    def credentials_authorized(self) -> bool:
        """The mock needs no key."""
        return True


def call_provider(
    request: ReviewRequest, config: ProviderConfig, adapter: ProviderAdapter
) -> str:
    """Send one review request, retrying transient failures with exponential backoff.

    Raises:
        ProviderAuthError: if the credentials are refused.
        ProviderTimeoutError: if every attempt failed transiently.
        ProviderRejectedError: on a non-retryable 4xx or malformed answer.
    """
    retrying = Retrying(
        stop=stop_after_attempt(config.max_retries + 1),
        wait=wait_exponential(multiplier=config.backoff_seconds, max=MAX_BACKOFF_SECONDS),
        retry=retry_if_exception_type(ProviderTransientError),
        reraise=True,
    )
    try:
        for attempt in retrying:
            with attempt:
                n = attempt.retry_state.attempt_number
                if n > 1:
                    logger.warning(
                        f"{request.file_path}: provider retry {n - 1}/{config.max_retries}"
                    )
                return adapter.complete(request.prompt_text)
    except ProviderTransientError as e:
        raise ProviderTimeoutError(
            f"provider failed {config.max_retries + 1} times, last error: {e}"
        ) from e
    raise ProviderError("provider call did not complete")


def build_provider(config: ProviderConfig) -> ProviderAdapter:
    """Instantiate the configured adapter."""
    if config.kind == ProviderKind.MOCK:
        return MockProvider(config)
    return ChatCompletionsProvider(config)
