# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Pre-flight checks of a review trigger.

The checks turn what would otherwise be silent provider failures into a verdict with
one remediation message per violated rule. All violations are collected; nothing
short-circuits, so a single comment can tell the author everything to fix.
"""

import logging

from reviewer.core.models import (
    ChangedFile,
    GuardrailPolicy,
    GuardrailVerdict,
    Rejection,
)
from reviewer.literals import (
    BINARY_SNIFF_BYTES,
    DEFAULT_CREDENTIAL_REF,
    GuardrailRule,
)

logger = logging.getLogger(__name__)


def looks_binary(content: bytes | None) -> bool:
    """A NUL byte in the first 8 KiB marks the content as binary."""
    return bool(content) and b"\x00" in content[:BINARY_SNIFF_BYTES]


def check_credentials(
    present: bool, authorized: bool, credential_ref: str = DEFAULT_CREDENTIAL_REF
) -> GuardrailVerdict:
    """Reject when the provider key is missing or not usable."""
    if present and authorized:
        return GuardrailVerdict()
    if not present:
        message = (
            f"No API key found for the review bot. Add a repository secret named "
            f"{credential_ref} (Settings > Secrets and variables > Actions) and expose it "
            f"to the workflow as the {credential_ref} environment variable, then push again."
        )
    else:
        message = (
            f"The API key in {credential_ref} was refused or is still a placeholder. "
            f"Replace the secret {credential_ref} with a valid key issued for this course, "
            f"then push again."
        )
    return GuardrailVerdict(
        rejections=[
            Rejection(rule=GuardrailRule.CREDENTIALS, message=message, item=credential_ref)
        ]
    )


def _artifact_rejection(changed: ChangedFile, policy: GuardrailPolicy) -> Rejection | None:
    ext = changed.extension
    if ext in policy.denied_extensions:
        return Rejection(
            rule=GuardrailRule.ARTIFACT_TYPE,
            message=(
                f"{changed.path}: .{ext} is a non-code artefact and cannot be reviewed. "
                f"Keep images, archives and documents out of the pull request you send "
                f"for review, or move them to a separate pull request."
            ),
            item=changed.path,
        )
    if not ext:
        if looks_binary(changed.content):
            return Rejection(
                rule=GuardrailRule.ARTIFACT_TYPE,
                message=(
                    f"{changed.path}: the file has no extension and contains binary data. "
                    f"Only source code can be reviewed."
                ),
                item=changed.path,
            )
        return None
    if policy.allowed_extensions and ext not in policy.allowed_extensions:
        allowed = ", ".join(f".{e}" for e in sorted(policy.allowed_extensions))
        return Rejection(
            rule=GuardrailRule.ARTIFACT_TYPE,
            message=(
                f"{changed.path}: unsupported file type .{ext}. "
                f"The reviewer accepts source files only ({allowed})."
            ),
            item=changed.path,
        )
    return None


def check_files(changed_files: list[ChangedFile], policy: GuardrailPolicy) -> GuardrailVerdict:
    """Check file types, the number of files and the size of the change."""
    rejections = []
    for changed in changed_files:
        if rejection := _artifact_rejection(changed, policy):
            rejections.append(rejection)

    if len(changed_files) > policy.max_files_per_review:
        rejections.append(
            Rejection(
                rule=GuardrailRule.SCOPE,
                message=(
                    f"This pull request changes {len(changed_files)} files; a single review "
                    f"accepts at most {policy.max_files_per_review}. Scope meaningful diffs, "
                    f"not entire repositories: split the work into smaller pull requests, "
                    f"one per task."
                ),
                item=str(len(changed_files)),
            )
        )

    for changed in changed_files:
        if changed.changed_lines > policy.max_changed_lines_per_file:
            rejections.append(
                Rejection(
                    rule=GuardrailRule.FILE_LIMIT,
                    message=(
                        f"{changed.path}: {changed.changed_lines} changed lines exceed the "
                        f"per-file limit of {policy.max_changed_lines_per_file}. Break the "
                        f"change into smaller commits and pull requests."
                    ),
                    item=changed.path,
                )
            )

    total = sum(c.changed_lines for c in changed_files)
    if total > policy.max_total_changed_lines:
        rejections.append(
            Rejection(
                rule=GuardrailRule.TOTAL_LIMIT,
                message=(
                    f"The pull request changes {total} lines in total, over the limit of "
                    f"{policy.max_total_changed_lines}. Review one feature at a time."
                ),
                item=str(total),
            )
        )

    if rejections:
        logger.info(
            f"Guardrails rejected {len(changed_files)} files: {len(rejections)} violations"
        )
    return GuardrailVerdict(rejections=rejections)


class GuardrailManager:
    """Applies the policy to a trigger."""

    def __init__(self, policy: GuardrailPolicy, credential_ref: str = DEFAULT_CREDENTIAL_REF):
        self.policy = policy
        self.credential_ref = credential_ref

    def check(
        self, changed_files: list[ChangedFile], present: bool, authorized: bool
    ) -> GuardrailVerdict:
        """Credentials first, then the files."""
        verdict = GuardrailVerdict()
        if self.policy.require_credentials:
            verdict = check_credentials(present, authorized, self.credential_ref)
        return verdict.merge(check_files(changed_files, self.policy))
