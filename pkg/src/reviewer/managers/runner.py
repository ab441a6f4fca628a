# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""The review bot.

`ReviewRunner.handle_trigger` runs the whole pipeline for one pull request: fetch the
changed files, apply the guardrails, prompt the provider once per file and post the
answers back as comments. Processing of a given pull request is serialized; the
provider calls for the files of one pull request run with a bounded parallelism.
"""

import asyncio
import logging
import os
from typing import Any, Optional

from jinja2 import Environment, FileSystemLoader
from prometheus_client import REGISTRY, CollectorRegistry, Counter

from reviewer.core.config import HostConfig, ServiceConfig
from reviewer.core.models import (
    ChangedFile,
    GuardrailVerdict,
    PostedComment,
    ReviewResult,
    TriggerEvent,
)
from reviewer.literals import (
    FAILURE_HEADER,
    SUCCESS_HEADER,
    CommentTooLargeError,
    DuplicateDeliveryError,
    EmptyPayloadError,
    FailureReason,
    HostUnreachableError,
    PayloadMode,
    ProviderAuthError,
    ProviderError,
    ReviewOutcome,
)
from reviewer.managers.guardrails import GuardrailManager, check_credentials
from reviewer.managers.host import CodeHost
from reviewer.managers.ledger import DeliveryLedger
from reviewer.managers.prompt import TEMPLATES_DIR, PromptBuilder, chunk_payload
from reviewer.managers.provider import ProviderAdapter, call_provider

logger = logging.getLogger(__name__)

FAILURE_TEMPLATE = "failure_comment.j2"
GUARDRAIL_FOOTER = "Fix the items above and push again to trigger a new review."
PROVIDER_FOOTER = "The other files were reviewed normally. Push again to retry."
# Room left in each comment chunk for the "(part k of n)" marker
PART_SUFFIX_RESERVE = 32


class ReviewMetrics:
    """Prometheus counters of the bot."""

    def __init__(self, registry: CollectorRegistry = REGISTRY):
        self.registry = registry
        self.deliveries = Counter(
            "reviewer_deliveries", "Review triggers received", ["status"], registry=registry
        )
        self.files_reviewed = Counter(
            "reviewer_files_reviewed", "Files that received a review comment", registry=registry
        )
        self.review_failures = Counter(
            "reviewer_review_failures", "Files left without a review", ["rule"], registry=registry
        )
        self.guardrail_rejections = Counter(
            "reviewer_guardrail_rejections", "Guardrail violations", ["rule"], registry=registry
        )


def format_review(file_path: str, review_text: str) -> str:
    """Comment body of a successful review; the header is what telemetry matches."""
    return f"{SUCCESS_HEADER}{file_path}:\n{review_text}"


def post_comment(
    host: CodeHost,
    repo_id: str,
    pr_number: int,
    body: str,
    config: HostConfig,
    posted: list[PostedComment] | None = None,
) -> list[PostedComment]:
    """Post a comment, split into numbered parts when it is over the host limit.

    Every part the host accepted is also appended to `posted`, so a caller still
    knows what went out when a later part fails.

    Raises:
        CommentTooLargeError: if the body is over the limit and chunking is disabled.
        HostUnreachableError: if the host fails.
    """
    if not body:
        raise ValueError("empty comment body")
    limit = config.comment_size_limit
    if len(body) <= limit:
        bodies = [body]
    elif not config.chunk_comments:
        raise CommentTooLargeError(f"comment of {len(body)} chars over the limit of {limit}")
    else:
        pieces = chunk_payload(body, limit - PART_SUFFIX_RESERVE)
        logger.info(f"{repo_id}#{pr_number}: comment split in {len(pieces)} parts")
        bodies = [
            f"{piece}\n\n(part {k} of {len(pieces)})" for k, piece in enumerate(pieces, start=1)
        ]

    comments = []
    for part in bodies:
        comment = host.post_comment(repo_id, pr_number, part)
        comments.append(comment)
        if posted is not None:
            posted.append(comment)
    return comments


class ReviewRunner:
    """Runs reviews for triggers."""

    def __init__(
        self,
        config: ServiceConfig,
        host: CodeHost,
        provider: ProviderAdapter,
        ledger: DeliveryLedger | None = None,
        metrics: ReviewMetrics | None = None,
    ):
        self.config = config
        self.host = host
        self.provider = provider
        self.ledger = ledger if ledger is not None else DeliveryLedger(config.service.ledger_path)
        self.metrics = metrics or ReviewMetrics(CollectorRegistry())
        self.guardrails = GuardrailManager(config.guardrails, config.provider.credential_ref)
        self.prompts = PromptBuilder(config.bot.checklist_path, config.bot.max_payload_chars)
        self._failure_template = Environment(
            loader=FileSystemLoader(TEMPLATES_DIR), autoescape=False
        ).get_template(FAILURE_TEMPLATE)
        # Per pull request: the lock and the number of triggers holding or awaiting it
        self._pr_locks: dict[tuple[str, int], tuple[asyncio.Lock, int]] = {}

    def _claim(self, event: TriggerEvent) -> None:
        if not self.ledger.claim(event.delivery_id):
            raise DuplicateDeliveryError(f"delivery {event.delivery_id} already processed")

    async def handle_trigger(self, event: TriggerEvent) -> list[ReviewResult]:
        """Review one pull request. Replayed deliveries return no results.

        Raises:
            HostUnreachableError: if the code host fails. The delivery can be retried
                only when nothing was posted for it yet.
        """
        self.metrics.deliveries.labels(status="received").inc()
        try:
            self._claim(event)
        except DuplicateDeliveryError as e:
            logger.info(f"Ignoring replay: {e}")
            self.metrics.deliveries.labels(status="duplicate").inc()
            return []

        key = event.pr_key
        lock, users = self._pr_locks.get(key, (asyncio.Lock(), 0))
        self._pr_locks[key] = (lock, users + 1)
        posted: list[PostedComment] = []
        try:
            async with lock:
                return await self._review(event, posted)
        except HostUnreachableError:
            if posted:
                logger.error(
                    f"Delivery {event.delivery_id} kept after {len(posted)} posted comments; "
                    "a redelivery would duplicate them"
                )
            else:
                self.ledger.release(event.delivery_id)
            raise
        finally:
            lock, users = self._pr_locks[key]
            if users == 1:
                del self._pr_locks[key]
            else:
                self._pr_locks[key] = (lock, users - 1)

    async def _post(
        self, event: TriggerEvent, body: str, posted: list[PostedComment]
    ) -> list[PostedComment]:
        return await asyncio.to_thread(
            post_comment,
            self.host,
            event.repo_id,
            event.pr_number,
            body,
            self.config.host,
            posted,
        )

    async def _review(
        self, event: TriggerEvent, posted: list[PostedComment]
    ) -> list[ReviewResult]:
        pr = f"{event.repo_id}#{event.pr_number}"
        files = await asyncio.to_thread(
            self.host.changed_files, event.repo_id, event.pr_number, event.head_sha
        )
        files = [f for f in files if f.status != "removed"]
        logger.info(f"{pr}@{event.head_sha[:7]}: {len(files)} changed files")
        if not files:
            return []

        verdict = self.guardrails.check(
            files, self.provider.credentials_present(), self.provider.credentials_authorized()
        )
        if not verdict.passed:
            return await self._reject(event, files, verdict, posted)

        semaphore = asyncio.Semaphore(self.config.provider.parallelism)
        reviews = await asyncio.gather(*(self._review_file(f, semaphore) for f in files))

        results = []
        failures = []
        for changed, (text, error) in zip(files, reviews):
            if error is None:
                body = format_review(changed.path, text)
                try:
                    comments = await self._post(event, body, posted)
                except CommentTooLargeError as e:
                    error = (FailureReason.COMMENT_TOO_LARGE.value, str(e))
                else:
                    self.metrics.files_reviewed.inc()
                    results.append(
                        ReviewResult(
                            file_path=changed.path,
                            outcome=ReviewOutcome.POSTED,
                            comment_body=body,
                            posted_at=comments[0].posted_at,
                        )
                    )
                    continue

            rule, message = error
            self.metrics.review_failures.labels(rule=rule).inc()
            results.append(
                ReviewResult(
                    file_path=changed.path,
                    outcome=ReviewOutcome.FAILED,
                    failure_rule=rule,
                    failure_message=message,
                )
            )
            if rule != FailureReason.EMPTY_PAYLOAD.value:
                failures.append({"rule": rule, "item": changed.path, "message": message})

        if failures:
            logger.error(f"{pr}: {len(failures)} of {len(files)} files could not be reviewed")
            body = self._render_failure(
                failures, f"{len(failures)} of {len(files)} files", PROVIDER_FOOTER
            )
            await self._post(event, body, posted)
        return results

    def _payload(self, changed: ChangedFile) -> str:
        if self.config.bot.payload_mode == PayloadMode.DIFF:
            return changed.patch or ""
        if changed.content is None:
            return changed.patch or ""
        return changed.content.decode("utf-8", errors="replace")

    async def _review_file(
        self, changed: ChangedFile, semaphore: asyncio.Semaphore
    ) -> tuple[Optional[str], Optional[tuple[str, str]]]:
        """Return (review text, None) or (None, (rule, message))."""
        try:
            review_requests = self.prompts.build_prompts(changed.path, self._payload(changed))
        except EmptyPayloadError as e:
            logger.warning(str(e))
            return None, (FailureReason.EMPTY_PAYLOAD.value, str(e))

        answers = []
        for request in review_requests:
            async with semaphore:
                try:
                    answers.append(
                        await asyncio.to_thread(
                            call_provider, request, self.config.provider, self.provider
                        )
                    )
                except ProviderAuthError:
                    message = check_credentials(
                        True, False, self.config.provider.credential_ref
                    ).rejections[0].message
                    return None, (ProviderAuthError.reason.value, message)
                except ProviderError as e:
                    logger.error(f"{changed.path}: {e}")
                    return None, (e.reason.value, str(e))

        if len(answers) == 1:
            return answers[0], None
        return (
            "\n\n".join(
                f"(part {k} of {len(answers)})\n{answer}"
                for k, answer in enumerate(answers, start=1)
            ),
            None,
        )

    def _render_failure(self, rejections: list[dict[str, Any]], context: str, footer: str) -> str:
        return self._failure_template.render(
            header=FAILURE_HEADER, context=context, rejections=rejections, footer=footer
        )

    async def _reject(
        self,
        event: TriggerEvent,
        files: list[ChangedFile],
        verdict: GuardrailVerdict,
        posted: list[PostedComment],
    ) -> list[ReviewResult]:
        """Post one consolidated guardrail comment; every file fails."""
        for rule in verdict.rules:
            self.metrics.guardrail_rejections.labels(rule=rule.value).inc()
        logger.info(
            f"{event.repo_id}#{event.pr_number}: rejected by "
            f"{', '.join(r.value for r in verdict.rules)}"
        )
        body = self._render_failure(
            [
                {"rule": r.rule.value, "item": r.item, "message": r.message}
                for r in verdict.rejections
            ],
            "",
            GUARDRAIL_FOOTER,
        )
        await self._post(event, body, posted)

        results = []
        for changed in files:
            own = [r for r in verdict.rejections if r.item == changed.path]
            rejection = (own or verdict.rejections)[0]
            self.metrics.review_failures.labels(rule=rejection.rule.value).inc()
            results.append(
                ReviewResult(
                    file_path=changed.path,
                    outcome=ReviewOutcome.FAILED,
                    failure_rule=rejection.rule.value,
                    failure_message=rejection.message,
                )
            )
        return results


def ledger_for(config: ServiceConfig) -> DeliveryLedger:
    """Ledger at the configured path, creating its directory."""
    path = config.service.ledger_path
    if path and (directory := os.path.dirname(path)):
        os.makedirs(directory, exist_ok=True)
    return DeliveryLedger(path)
