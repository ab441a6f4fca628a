# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""This module contains the constants, enums and errors used by the reviewer."""

from enum import Enum

VALID_LOG_LEVELS = ["info", "debug", "warning", "error", "critical"]

# Comment wire format, the telemetry classifier depends on it
SUCCESS_HEADER = "ChatGPT review for "
DEFAULT_BOT_LOGINS = ("cr-gpt[bot]", "github-actions[bot]")

# Guardrail and provider failure comments all start with this line
FAILURE_HEADER = "AI review could not run"

DEFAULT_CREDENTIAL_REF = "LLM_API_KEY"
DEFAULT_HOST_TOKEN_ENV = "HOST_TOKEN"
DEFAULT_WEBHOOK_SECRET_ENV = "WEBHOOK_SECRET"

SEMESTER_WEEKS = 14
DEFAULT_TIMEZONE = "Australia/Melbourne"

DEFAULT_MAX_PAYLOAD_CHARS = 12000
MIN_PAYLOAD_CHARS = 200
HOST_COMMENT_SIZE_LIMIT = 65536
BINARY_SNIFF_BYTES = 8192

METRICS_PORT = 8088
WEBHOOK_PATH = "/webhook/pull_request"
WEBHOOK_ACTIONS = ("opened", "synchronize")


class EngagementStatus(str, Enum):
    """Engagement of a pull request with the review bot.

    * SUCCESSFUL: at least one bot comment carries the review header
    * FAILED: the bot was triggered but only returned errors
    * NONE: the bot never ran on the pull request
    """

    SUCCESSFUL = "successful_ai_review"
    FAILED = "failed_ai_attempt"
    NONE = "no_ai_attempt"


class GuardrailOutcome(str, Enum):
    """Outcome of the pre-flight checks."""

    PASS = "pass"
    REJECT = "reject"


class GuardrailRule(str, Enum):
    """Identifiers of the pre-flight rules."""

    CREDENTIALS = "credentials"
    ARTIFACT_TYPE = "artifact-type"
    SCOPE = "scope"
    FILE_LIMIT = "file-limit"
    TOTAL_LIMIT = "total-limit"


class ReviewOutcome(str, Enum):
    """Outcome of a review for a single file."""

    POSTED = "posted"
    FAILED = "failed"


class FailureReason(str, Enum):
    """Reasons a single file ends up without a review."""

    PROVIDER_TIMEOUT = "provider-timeout"
    PROVIDER_REJECTED = "provider-rejected"
    PROVIDER_ERROR = "provider-error"
    EMPTY_PAYLOAD = "empty-payload"
    COMMENT_TOO_LARGE = "comment-too-large"


class PayloadMode(str, Enum):
    """What the bot sends to the provider for each file."""

    CONTENT = "content"
    DIFF = "diff"


class ProviderKind(str, Enum):
    """Built-in provider adapters."""

    CHAT_COMPLETIONS = "chat-completions"
    MOCK = "mock"


class HostKind(str, Enum):
    """Built-in code hosts."""

    GITHUB = "github"
    SNAPSHOT = "snapshot"


class Subcommand(str, Enum):
    """CLI subcommands."""

    SERVE = "serve"
    REVIEW = "review"
    INGEST = "ingest"
    ANALYZE = "analyze"
    REPORT = "report"
    DEMO = "demo"


class Sprint(str, Enum):
    """Agile sprints of the semester."""

    DESIGN = "design"
    DEVELOPMENT_I = "development-1"
    DEVELOPMENT_II = "development-2"
    HANDOVER = "handover"


class ReviewerError(Exception):
    """Reviewer error."""


class ConfigError(ReviewerError):
    """Invalid or unreadable configuration."""


class UnknownTimezoneError(ReviewerError):
    """The calendar timezone is not in the timezone database."""


class SchemaError(ReviewerError):
    """An input record does not follow the documented schema."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        location = f"{path}:{line}: " if path and line else ""
        super().__init__(f"{location}{message}")


class OutputError(ReviewerError):
    """An output file or directory could not be written."""


class UnmappedPRError(ReviewerError):
    """A pull request's repository has no team assignment."""


class EmptyPayloadError(ReviewerError):
    """Nothing to review."""


class HostUnreachableError(ReviewerError):
    """The code host API failed after all retries."""


class DuplicateDeliveryError(ReviewerError):
    """The webhook delivery was already processed."""


class CommentTooLargeError(ReviewerError):
    """The comment exceeds the host limit and chunking is disabled."""


class ProviderError(ReviewerError):
    """The LLM provider failed."""

    reason = FailureReason.PROVIDER_ERROR


class ProviderAuthError(ProviderError):
    """The provider refused the credentials."""

    reason = GuardrailRule.CREDENTIALS


class ProviderTimeoutError(ProviderError):
    """The provider did not answer in time."""

    reason = FailureReason.PROVIDER_TIMEOUT


class ProviderRejectedError(ProviderError):
    """The provider rejected the request with a non-retryable status."""

    reason = FailureReason.PROVIDER_REJECTED


class ProviderTransientError(ProviderError):
    """Retryable transport or server error."""
