# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Code host clients.

The bot and the live ingest talk to the code host through `CodeHost`. `GitHubHost`
uses the REST API; `SnapshotHost` keeps pull requests in memory (tests, demo and
offline dry runs); `DryRunHost` wraps any host and prints comments instead of
posting them.
"""

import base64
import binascii
import json
import logging
import sys
import threading
from abc import ABC, abstractmethod
from datetime import datetime, timezone
from typing import Any, Callable, Optional, TextIO

import requests
from overrides import override
from pydantic import BaseModel
from tenacity import (
    Retrying,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from reviewer.core.config import HostConfig
from reviewer.core.instants import format_instant, parse_instant
from reviewer.core.models import ChangedFile, PostedComment
from reviewer.literals import HostUnreachableError, ReviewerError

logger = logging.getLogger(__name__)

Clock = Callable[[], datetime]


def utc_now() -> datetime:
    """Current instant, second precision."""
    return datetime.now(timezone.utc).replace(microsecond=0)


class PullRequestInfo(BaseModel):
    """What the bot needs to know about a pull request before reviewing it."""

    repo_id: str
    pr_number: int
    head_sha: str
    created_at: datetime
    author: str = ""


class CodeHost(ABC):
    """Interface of a code host."""

    @abstractmethod
    def pull_request(self, repo_id: str, pr_number: int) -> PullRequestInfo:
        """Metadata of one pull request."""
        ...

    @abstractmethod
    def changed_files(self, repo_id: str, pr_number: int, head_sha: str) -> list[ChangedFile]:
        """Files changed by the pull request, with their post-change content."""
        ...

    @abstractmethod
    def post_comment(self, repo_id: str, pr_number: int, body: str) -> PostedComment:
        """Post a comment as the bot identity."""
        ...

    @abstractmethod
    def list_pull_requests(self, repo_id: str) -> list[dict[str, Any]]:
        """Pull request rows in the ingest record schema."""
        ...

    @abstractmethod
    def list_comments(self, repo_id: str, pr_number: int) -> list[dict[str, Any]]:
        """Comment rows in the ingest record schema."""
        ...

    @abstractmethod
    def list_commits(self, repo_id: str, pr_number: int) -> list[dict[str, Any]]:
        """Commit rows in the ingest record schema."""
        ...


class _RetryableHostError(ReviewerError):
    """Connection failure or 5xx answer."""


class GitHubHost(CodeHost):
    """GitHub REST API client."""

    def __init__(self, config: HostConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()
        self.session.headers.update({"Accept": "application/vnd.github+json"})
        if token := config.token():
            self.session.headers.update({"Authorization": f"Bearer {token}"})

    def _request(self, method: str, url: str, **kwargs) -> requests.Response:
        retrying = Retrying(
            stop=stop_after_attempt(self.config.max_retries + 1),
            wait=wait_exponential(multiplier=0.5, max=10),
            retry=retry_if_exception_type(_RetryableHostError),
            reraise=True,
        )
        try:
            for attempt in retrying:
                with attempt:
                    try:
                        response = self.session.request(
                            method, url, timeout=self.config.timeout_seconds, **kwargs
                        )
                    except requests.RequestException as e:
                        raise _RetryableHostError(f"{method} {url}: {type(e).__name__}") from e
                    if response.status_code >= 500:
                        raise _RetryableHostError(f"{method} {url}: HTTP {response.status_code}")
                    return response
        except _RetryableHostError as e:
            logger.error(f"Code host unreachable: {e}")
            raise HostUnreachableError(str(e)) from e
        raise HostUnreachableError(f"{method} {url}: no attempt made")

    def _get(self, path: str, **params) -> Any:
        response = self._request("GET", f"{self.config.api_url}{path}", params=params)
        if response.status_code >= 400:
            raise HostUnreachableError(f"GET {path}: HTTP {response.status_code}")
        return response.json()

    def _get_paginated(self, path: str) -> list[Any]:
        rows = []
        url = f"{self.config.api_url}{path}"
        params = {"per_page": 100}
        while url:
            response = self._request("GET", url, params=params)
            if response.status_code >= 400:
                raise HostUnreachableError(f"GET {url}: HTTP {response.status_code}")
            rows.extend(response.json())
            url = response.links.get("next", {}).get("url")
            # The next link already carries the query string
            params = None
        return rows

    @override
    def pull_request(self, repo_id: str, pr_number: int) -> PullRequestInfo:
        """Metadata of one pull request."""
        data = self._get(f"/repos/{repo_id}/pulls/{pr_number}")
        return PullRequestInfo(
            repo_id=repo_id,
            pr_number=pr_number,
            head_sha=data["head"]["sha"],
            created_at=parse_instant(data["created_at"]),
            author=(data.get("user") or {}).get("login", ""),
        )

    def _content(self, repo_id: str, path: str, ref: str) -> Optional[bytes]:
        response = self._request(
            "GET", f"{self.config.api_url}/repos/{repo_id}/contents/{path}", params={"ref": ref}
        )
        if response.status_code >= 400:
            logger.warning(f"{repo_id}: cannot read {path}@{ref}: HTTP {response.status_code}")
            return None
        try:
            return base64.b64decode(response.json().get("content", ""))
        except (ValueError, binascii.Error):
            return None

    @override
    def changed_files(self, repo_id: str, pr_number: int, head_sha: str) -> list[ChangedFile]:
        """Files changed by the pull request."""
        files = []
        for row in self._get_paginated(f"/repos/{repo_id}/pulls/{pr_number}/files"):
            status = row.get("status", "modified")
            files.append(
                ChangedFile(
                    path=row["filename"],
                    added_lines=row.get("additions", 0),
                    removed_lines=row.get("deletions", 0),
                    status=status,
                    patch=row.get("patch"),
                    content=None
                    if status == "removed"
                    else self._content(repo_id, row["filename"], head_sha),
                )
            )
        return files

    @override
    def post_comment(self, repo_id: str, pr_number: int, body: str) -> PostedComment:
        """Post an issue comment on the pull request."""
        response = self._request(
            "POST",
            f"{self.config.api_url}/repos/{repo_id}/issues/{pr_number}/comments",
            json={"body": body},
        )
        if response.status_code >= 400:
            raise HostUnreachableError(
                f"{repo_id}#{pr_number}: comment refused with HTTP {response.status_code}"
            )
        data = response.json()
        return PostedComment(
            comment_id=str(data["id"]), posted_at=parse_instant(data["created_at"]), body=body
        )

    @override
    def list_pull_requests(self, repo_id: str) -> list[dict[str, Any]]:
        """All pull requests of the repository."""
        return [
            {
                "repo_id": repo_id,
                "number": row["number"],
                "created_at": row["created_at"],
                "author": (row.get("user") or {}).get("login", ""),
            }
            for row in self._get_paginated(f"/repos/{repo_id}/pulls?state=all")
        ]

    @override
    def list_comments(self, repo_id: str, pr_number: int) -> list[dict[str, Any]]:
        """Conversation comments of the pull request."""
        return [
            {
                "repo_id": repo_id,
                "pr_number": pr_number,
                "author_login": (row.get("user") or {}).get("login", ""),
                "body": row.get("body") or "",
                "created_at": row["created_at"],
            }
            for row in self._get_paginated(f"/repos/{repo_id}/issues/{pr_number}/comments")
        ]

    @override
    def list_commits(self, repo_id: str, pr_number: int) -> list[dict[str, Any]]:
        """Commits of the pull request, with the committer timestamp."""
        return [
            {
                "repo_id": repo_id,
                "pr_number": pr_number,
                "sha": row["sha"],
                "message": row["commit"].get("message", ""),
                "committed_at": row["commit"]["committer"]["date"],
            }
            for row in self._get_paginated(f"/repos/{repo_id}/pulls/{pr_number}/commits")
        ]


class SnapshotFile(BaseModel):
    """A changed file stored in a snapshot."""

    path: str
    added_lines: int = 0
    removed_lines: int = 0
    status: str = "modified"
    content: Optional[str] = None
    patch: Optional[str] = None


class SnapshotPull(BaseModel):
    """A pull request stored in a snapshot."""

    number: int
    created_at: str
    author: str = ""
    head_sha: str = "0000000"
    files: list[SnapshotFile] = []
    comments: list[dict[str, Any]] = []
    commits: list[dict[str, Any]] = []


class Snapshot(BaseModel):
    """In-memory state of a code host: repo_id -> pull requests."""

    repos: dict[str, list[SnapshotPull]] = {}


class SnapshotHost(CodeHost):
    """In-memory code host."""

    def __init__(
        self,
        snapshot: Snapshot | None = None,
        bot_login: str = "github-actions[bot]",
        clock: Clock = utc_now,
    ):
        self.snapshot = snapshot or Snapshot()
        self.bot_login = bot_login
        self.clock = clock
        self.posted: list[tuple[str, int, PostedComment]] = []
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str, **kwargs) -> "SnapshotHost":
        """Load a JSON snapshot."""
        with open(path, "r") as f:
            return cls(Snapshot.parse_obj(json.load(f)), **kwargs)

    def dump(self, path: str) -> None:
        """Write the snapshot, posted comments included."""
        with open(path, "w") as f:
            f.write(self.snapshot.json(indent=2, sort_keys=True))

    def add_pull(self, repo_id: str, pull: SnapshotPull) -> None:
        """Register a pull request."""
        with self._lock:
            self.snapshot.repos.setdefault(repo_id, []).append(pull)

    def _pull(self, repo_id: str, pr_number: int) -> SnapshotPull:
        for pull in self.snapshot.repos.get(repo_id, []):
            if pull.number == pr_number:
                return pull
        raise HostUnreachableError(f"{repo_id}#{pr_number} not found")

    @override
    def pull_request(self, repo_id: str, pr_number: int) -> PullRequestInfo:
        """Metadata of one pull request."""
        pull = self._pull(repo_id, pr_number)
        return PullRequestInfo(
            repo_id=repo_id,
            pr_number=pr_number,
            head_sha=pull.head_sha,
            created_at=parse_instant(pull.created_at),
            author=pull.author,
        )

    @override
    def changed_files(self, repo_id: str, pr_number: int, head_sha: str) -> list[ChangedFile]:
        """Files changed by the pull request."""
        return [
            ChangedFile(
                path=f.path,
                added_lines=f.added_lines,
                removed_lines=f.removed_lines,
                status=f.status,
                patch=f.patch,
                content=f.content.encode("utf-8") if f.content is not None else None,
            )
            for f in self._pull(repo_id, pr_number).files
        ]

    @override
    def post_comment(self, repo_id: str, pr_number: int, body: str) -> PostedComment:
        """Append a bot comment to the pull request."""
        with self._lock:
            pull = self._pull(repo_id, pr_number)
            posted = PostedComment(
                comment_id=f"c{len(self.posted) + 1}", posted_at=self.clock(), body=body
            )
            pull.comments.append(
                {
                    "author_login": self.bot_login,
                    "body": body,
                    "created_at": format_instant(posted.posted_at),
                }
            )
            self.posted.append((repo_id, pr_number, posted))
        return posted

    @override
    def list_pull_requests(self, repo_id: str) -> list[dict[str, Any]]:
        """All pull requests of the repository."""
        return [
            {
                "repo_id": repo_id,
                "number": p.number,
                "created_at": p.created_at,
                "author": p.author,
            }
            for p in self.snapshot.repos.get(repo_id, [])
        ]

    @override
    def list_comments(self, repo_id: str, pr_number: int) -> list[dict[str, Any]]:
        """Comments of the pull request."""
        return [
            {"repo_id": repo_id, "pr_number": pr_number, **c}
            for c in self._pull(repo_id, pr_number).comments
        ]

    @override
    def list_commits(self, repo_id: str, pr_number: int) -> list[dict[str, Any]]:
        """Commits of the pull request."""
        return [
            {"repo_id": repo_id, "pr_number": pr_number, **c}
            for c in self._pull(repo_id, pr_number).commits
        ]


class DryRunHost(CodeHost):
    """Reads from the wrapped host; prints comments instead of posting them."""

    def __init__(self, inner: CodeHost, out: TextIO | None = None, clock: Clock = utc_now):
        self.inner = inner
        self.out = out or sys.stdout
        self.clock = clock
        self.posted: list[tuple[str, int, PostedComment]] = []

    @override
    def pull_request(self, repo_id: str, pr_number: int) -> PullRequestInfo:
        """Delegate to the wrapped host."""
        return self.inner.pull_request(repo_id, pr_number)

    @override
    def changed_files(self, repo_id: str, pr_number: int, head_sha: str) -> list[ChangedFile]:
        """Delegate to the wrapped host."""
        return self.inner.changed_files(repo_id, pr_number, head_sha)

    @override
    def post_comment(self, repo_id: str, pr_number: int, body: str) -> PostedComment:
        """Print the would-be comment."""
        posted = PostedComment(
            comment_id=f"dry-run-{len(self.posted) + 1}", posted_at=self.clock(), body=body
        )
        self.posted.append((repo_id, pr_number, posted))
        self.out.write(f"--- would post on {repo_id}#{pr_number} ---\n{body}\n")
        return posted

    @override
    def list_pull_requests(self, repo_id: str) -> list[dict[str, Any]]:
        """Delegate to the wrapped host."""
        return self.inner.list_pull_requests(repo_id)

    @override
    def list_comments(self, repo_id: str, pr_number: int) -> list[dict[str, Any]]:
        """Delegate to the wrapped host."""
        return self.inner.list_comments(repo_id, pr_number)

    @override
    def list_commits(self, repo_id: str, pr_number: int) -> list[dict[str, Any]]:
        """Delegate to the wrapped host."""
        return self.inner.list_commits(repo_id, pr_number)


def build_host(config: HostConfig, bot_login: str = "github-actions[bot]") -> CodeHost:
    """Instantiate the configured host."""
    if config.kind.value == "snapshot":
        if not config.snapshot_path:
            raise HostUnreachableError("host.kind=snapshot needs host.snapshot_path")
        return SnapshotHost.from_file(config.snapshot_path, bot_login=bot_login)
    return GitHubHost(config)
