#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

from reviewer.core.models import TriggerEvent
from reviewer.managers.host import SnapshotFile, SnapshotPull

TEST_KEY = "sk-test-4f9a1c2b7e"
REPO = "team-01-2024/project"
HEAD_SHA = "abcdef1234567"
CODE = "def f():\n    return 1\n"


def pull(number, *paths, contents=None, **kwargs):
    contents = contents or {}
    return SnapshotPull(
        number=number,
        created_at="2024-05-14T06:52:10Z",
        head_sha=HEAD_SHA,
        files=[
            SnapshotFile(path=path, added_lines=3, content=contents.get(path, CODE))
            for path in paths
        ],
        **kwargs,
    )


def trigger(number=1, delivery_id="d-1", repo_id=REPO):
    return TriggerEvent(
        repo_id=repo_id, pr_number=number, head_sha=HEAD_SHA, delivery_id=delivery_id
    )
