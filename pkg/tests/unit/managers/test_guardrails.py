#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

from parameterized import parameterized

from reviewer.core.models import ChangedFile, GuardrailPolicy
from reviewer.literals import GuardrailOutcome, GuardrailRule
from reviewer.managers.guardrails import (
    GuardrailManager,
    check_credentials,
    check_files,
    looks_binary,
)

POLICY = GuardrailPolicy()


def files(*paths, lines=4):
    return [ChangedFile(path=p, added_lines=lines, content=b"x = 1\n") for p in paths]


@parameterized.expand(
    [
        (False, False, "No API key found"),
        (True, False, "was refused or is still a placeholder"),
    ]
)
def test_credentials(present, authorized, fragment):
    verdict = check_credentials(present, authorized, "OPENAI_API_KEY")
    assert verdict.outcome == GuardrailOutcome.REJECT
    assert verdict.rules == [GuardrailRule.CREDENTIALS]
    message = verdict.rejections[0].message
    assert fragment in message
    assert "OPENAI_API_KEY" in message


def test_credentials_pass():
    assert check_credentials(True, True).passed


def test_artifact_types():
    verdict = check_files(files("src/app.py", "docs/wireframe.PNG", "data.csv", "LICENSE"), POLICY)
    assert [(r.rule, r.item) for r in verdict.rejections] == [
        (GuardrailRule.ARTIFACT_TYPE, "docs/wireframe.PNG"),
        (GuardrailRule.ARTIFACT_TYPE, "data.csv"),
    ]
    assert "non-code artefact" in verdict.rejections[0].message
    assert "unsupported file type .csv" in verdict.rejections[1].message


def test_binary_without_extension():
    changed = ChangedFile(path="bin/tool", added_lines=1, content=b"\x7fELF\x00\x01")
    verdict = check_files([changed], POLICY)
    assert verdict.rules == [GuardrailRule.ARTIFACT_TYPE]
    assert looks_binary(b"a" * 9000 + b"\x00") is False
    assert looks_binary(None) is False


def test_scope():
    changed = files(*(f"src/module_{i}.py" for i in range(500)), lines=1)
    verdict = check_files(changed, POLICY.copy(update={"max_files_per_review": 25}))
    assert verdict.rules == [GuardrailRule.SCOPE]
    message = verdict.rejections[0].message
    assert "500 files" in message
    assert "Scope meaningful diffs, not entire repositories" in message


def test_line_limits():
    policy = GuardrailPolicy(max_changed_lines_per_file=10, max_total_changed_lines=15)
    verdict = check_files(files("a.py", "b.py", lines=8) + files("c.py", lines=11), policy)
    assert [(r.rule, r.item) for r in verdict.rejections] == [
        (GuardrailRule.FILE_LIMIT, "c.py"),
        (GuardrailRule.TOTAL_LIMIT, "27"),
    ]


def test_manager_collects_every_violation():
    manager = GuardrailManager(GuardrailPolicy(max_files_per_review=1))
    verdict = manager.check(files("a.py", "logo.zip"), present=False, authorized=False)
    assert verdict.rules == [
        GuardrailRule.CREDENTIALS,
        GuardrailRule.ARTIFACT_TYPE,
        GuardrailRule.SCOPE,
    ]
    assert all(r.message for r in verdict.rejections)


def test_manager_can_skip_credentials():
    manager = GuardrailManager(GuardrailPolicy(require_credentials=False))
    assert manager.check(files("a.py"), present=False, authorized=False).passed
