# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Service configuration.

The configuration is a YAML document with the sections ``provider``, ``guardrails``,
``host``, ``bot`` and ``service``. Every section has defaults, so an empty document
is a valid configuration. Secrets are never part of it: the document only names the
environment variables that hold them.
"""

import logging
import os
from typing import Optional

import yaml
from pydantic import BaseModel, ValidationError, conint, confloat, validator

from reviewer.core.models import ClassificationConfig, GuardrailPolicy
from reviewer.literals import (
    DEFAULT_BOT_LOGINS,
    DEFAULT_CREDENTIAL_REF,
    DEFAULT_HOST_TOKEN_ENV,
    DEFAULT_MAX_PAYLOAD_CHARS,
    DEFAULT_WEBHOOK_SECRET_ENV,
    HOST_COMMENT_SIZE_LIMIT,
    MIN_PAYLOAD_CHARS,
    SUCCESS_HEADER,
    ConfigError,
    HostKind,
    PayloadMode,
    ProviderKind,
)

logger = logging.getLogger(__name__)

PLACEHOLDER_KEYS = {"changeme", "sk-your-key", "your-api-key", "xxx"}


class ProviderConfig(BaseModel):
    """How to reach the LLM provider."""

    kind: ProviderKind = ProviderKind.CHAT_COMPLETIONS
    endpoint_url: str = "https://api.openai.com/v1/chat/completions"
    model_name: str = "gpt-4"
    credential_ref: str = DEFAULT_CREDENTIAL_REF
    timeout_seconds: conint(gt=0) = 60
    max_retries: conint(ge=0) = 2
    backoff_seconds: confloat(ge=0) = 1.0
    parallelism: conint(ge=1) = 2

    def api_key(self) -> Optional[str]:
        """Read the key from the environment; it is never stored on the model."""
        return os.environ.get(self.credential_ref) or None

    def credentials_present(self) -> bool:
        """The environment variable is set and not blank."""
        return bool((self.api_key() or "").strip())

    def credentials_authorized(self) -> bool:
        """The key does not look like a template placeholder."""
        key = (self.api_key() or "").strip()
        return (
            bool(key)
            and key.lower() not in PLACEHOLDER_KEYS
            and not key.lower().startswith("your-")
        )


class HostConfig(BaseModel):
    """How to reach the code host."""

    kind: HostKind = HostKind.GITHUB
    api_url: str = "https://api.github.com"
    token_env: str = DEFAULT_HOST_TOKEN_ENV
    snapshot_path: Optional[str] = None
    comment_size_limit: conint(ge=MIN_PAYLOAD_CHARS + 64) = HOST_COMMENT_SIZE_LIMIT
    chunk_comments: bool = True
    timeout_seconds: conint(gt=0) = 30
    max_retries: conint(ge=0) = 3

    def token(self) -> Optional[str]:
        """Read the host token from the environment."""
        return os.environ.get(self.token_env) or None


class BotConfig(BaseModel):
    """What the bot sends and how its comments are recognized."""

    payload_mode: PayloadMode = PayloadMode.CONTENT
    max_payload_chars: conint(ge=MIN_PAYLOAD_CHARS) = DEFAULT_MAX_PAYLOAD_CHARS
    checklist_path: Optional[str] = None
    success_header: str = SUCCESS_HEADER
    bot_logins: list[str] = list(DEFAULT_BOT_LOGINS)
    bot_login: str = "github-actions[bot]"

    @validator("checklist_path")
    @classmethod
    def must_exist(cls, value: Optional[str]) -> Optional[str]:
        """An override checklist must be readable."""
        if value and not os.path.isfile(value):
            raise ValueError(f"checklist override {value} not found")
        return value

    def classification(self, strict_teams: bool = False) -> ClassificationConfig:
        """Classification rules matching what this bot posts."""
        return ClassificationConfig(
            bot_logins=self.bot_logins,
            success_header=self.success_header,
            strict_teams=strict_teams,
        )


class ServiceSection(BaseModel):
    """Settings of the webhook service."""

    ledger_path: Optional[str] = None
    webhook_secret_env: str = DEFAULT_WEBHOOK_SECRET_ENV
    host: str = "0.0.0.0"
    port: conint(gt=0, lt=65536) = 8080

    def webhook_secret(self) -> Optional[str]:
        """Read the webhook secret from the environment."""
        return os.environ.get(self.webhook_secret_env) or None


class ServiceConfig(BaseModel):
    """The whole configuration document."""

    provider: ProviderConfig = ProviderConfig()
    guardrails: GuardrailPolicy = GuardrailPolicy()
    host: HostConfig = HostConfig()
    bot: BotConfig = BotConfig()
    service: ServiceSection = ServiceSection()

    class Config:
        extra = "forbid"


def load_config(path: str | None) -> ServiceConfig:
    """Load the configuration document, or the defaults when no path is given.

    Raises:
        ConfigError: if the file cannot be read or does not validate.
    """
    if not path:
        return ServiceConfig()
    try:
        with open(path, "r") as f:
            content = yaml.safe_load(f) or {}
        config = ServiceConfig.parse_obj(content)
    except OSError as e:
        raise ConfigError(f"cannot read configuration {path}: {e}") from e
    except (yaml.YAMLError, ValidationError) as e:
        raise ConfigError(f"invalid configuration {path}: {e}") from e
    logger.info(
        f"Loaded configuration {path}: provider={config.provider.kind.value} "
        f"host={config.host.kind.value}"
    )
    return config
