# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""HTTP surface of the bot.

The code host posts pull request events to `WEBHOOK_PATH`. The endpoint answers 202
right away and the review runs as a background task. Prometheus counters are served
under ``/metrics``.
"""

import json
import logging

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, hmac
from fastapi import BackgroundTasks, FastAPI, Header, HTTPException, Request
from prometheus_client import make_asgi_app
from pydantic import ValidationError

from reviewer.core.models import TriggerEvent
from reviewer.literals import WEBHOOK_ACTIONS, WEBHOOK_PATH, ReviewerError
from reviewer.managers.runner import ReviewRunner

logger = logging.getLogger(__name__)

SIGNATURE_PREFIX = "sha256="


def verify_signature(secret: str, body: bytes, signature: str | None) -> bool:
    """Check an ``X-Hub-Signature-256`` header against the raw body."""
    if not signature or not signature.startswith(SIGNATURE_PREFIX):
        return False
    try:
        expected = bytes.fromhex(signature[len(SIGNATURE_PREFIX) :])
    except ValueError:
        return False
    mac = hmac.HMAC(secret.encode("utf-8"), hashes.SHA256())
    mac.update(body)
    try:
        mac.verify(expected)
    except InvalidSignature:
        return False
    return True


def sign(secret: str, body: bytes) -> str:
    """Header value the code host would send for this body."""
    mac = hmac.HMAC(secret.encode("utf-8"), hashes.SHA256())
    mac.update(body)
    return f"{SIGNATURE_PREFIX}{mac.finalize().hex()}"


def trigger_from_payload(payload: dict, delivery_id: str) -> TriggerEvent:
    """Map a pull_request event payload onto a trigger."""
    return TriggerEvent(
        repo_id=payload["repository"]["full_name"],
        pr_number=payload["pull_request"]["number"],
        head_sha=payload["pull_request"]["head"]["sha"],
        delivery_id=delivery_id,
    )


async def _run(runner: ReviewRunner, event: TriggerEvent) -> None:
    try:
        results = await runner.handle_trigger(event)
    except ReviewerError as e:
        logger.error(f"Review of {event.repo_id}#{event.pr_number} failed: {e}")
        return
    logger.info(f"Review of {event.repo_id}#{event.pr_number}: {len(results)} results")


def build_app(runner: ReviewRunner, secret: str | None = None) -> FastAPI:
    """Create the webhook application."""
    app = FastAPI(title="llm-reviewer")
    app.mount("/metrics", make_asgi_app(registry=runner.metrics.registry))

    @app.post(WEBHOOK_PATH, status_code=202)
    async def pull_request_event(
        request: Request,
        background_tasks: BackgroundTasks,
        x_github_event: str | None = Header(None, alias="X-GitHub-Event"),
        x_github_delivery: str | None = Header(None, alias="X-GitHub-Delivery"),
        x_hub_signature_256: str | None = Header(None, alias="X-Hub-Signature-256"),
    ) -> dict:
        body = await request.body()
        if secret and not verify_signature(secret, body, x_hub_signature_256):
            logger.warning(f"Rejected delivery {x_github_delivery}: bad signature")
            raise HTTPException(status_code=401, detail="invalid signature")

        if x_github_event != "pull_request":
            return {"status": "ignored", "reason": f"event {x_github_event}"}
        try:
            payload = json.loads(body)
        except ValueError as e:
            raise HTTPException(status_code=400, detail="body is not JSON") from e
        action = payload.get("action")
        if action not in WEBHOOK_ACTIONS:
            return {"status": "ignored", "reason": f"action {action}"}
        if not x_github_delivery:
            raise HTTPException(status_code=400, detail="missing X-GitHub-Delivery")

        try:
            event = trigger_from_payload(payload, x_github_delivery)
        except (KeyError, TypeError, ValidationError) as e:
            raise HTTPException(status_code=400, detail=f"invalid pull_request payload: {e}")

        background_tasks.add_task(_run, runner, event)
        return {"status": "accepted", "delivery_id": event.delivery_id}

    return app
