# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Engagement telemetry.

Pull requests are classified from their bot comments: a comment carrying the review
header makes the pull request a successful review, a comment matching one of the
failure signatures a failed attempt. A successful review is actioned when a commit
lands strictly after the first review comment. Pull requests are then bucketed by
the semester week of their creation.

Input records come either from a directory of line-delimited JSON files or from the
code host API; both paths go through the same validation.
"""

import json
import logging
import os
import re
from collections import defaultdict
from contextlib import contextmanager
from typing import Any, Callable, Iterable, Iterator

from jsonschema import Draft7Validator
from pydantic import ValidationError

from reviewer.core.calendar import week_of
from reviewer.core.instants import format_instant, parse_instant
from reviewer.core.models import (
    ClassificationConfig,
    ClassifiedPR,
    CohortCalendar,
    CohortSummary,
    CommentRecord,
    CommitRecord,
    Dataset,
    DroppedRecord,
    IngestReport,
    PullRequestRecord,
    WeekIndex,
    WeeklyMetrics,
)
from reviewer.literals import (
    EngagementStatus,
    OutputError,
    SchemaError,
    UnmappedPRError,
)
from reviewer.managers.host import CodeHost

logger = logging.getLogger(__name__)

PRS_FILE = "prs.jsonl"
COMMENTS_FILE = "comments.jsonl"
COMMITS_FILE = "commits.jsonl"
TEAMS_FILE = "teams.json"

_TIMESTAMP = {"type": "string", "minLength": 1}
_REPO = {"type": "string", "minLength": 1}

PR_SCHEMA = {
    "type": "object",
    "required": ["repo_id", "number", "created_at"],
    "properties": {
        "repo_id": _REPO,
        "number": {"type": "integer", "minimum": 1},
        "created_at": _TIMESTAMP,
        "author": {"type": "string"},
    },
}
COMMENT_SCHEMA = {
    "type": "object",
    "required": ["repo_id", "pr_number", "author_login", "body", "created_at"],
    "properties": {
        "repo_id": _REPO,
        "pr_number": {"type": "integer", "minimum": 1},
        "author_login": {"type": "string"},
        "body": {"type": "string"},
        "created_at": _TIMESTAMP,
    },
}
COMMIT_SCHEMA = {
    "type": "object",
    "required": ["repo_id", "pr_number", "sha", "committed_at"],
    "properties": {
        "repo_id": _REPO,
        "pr_number": {"type": "integer", "minimum": 1},
        "sha": {"type": "string", "pattern": "^[0-9a-fA-F]{7,40}$"},
        "message": {"type": "string"},
        "committed_at": _TIMESTAMP,
    },
}
TEAMS_SCHEMA = {"type": "object", "additionalProperties": {"type": "string", "minLength": 1}}

Row = tuple[int, dict[str, Any]]


def _is_bot(comment: CommentRecord, rules: ClassificationConfig) -> bool:
    return comment.author_login in rules.bot_logins


def classify(pr: PullRequestRecord, rules: ClassificationConfig) -> ClassifiedPR:
    """Derive the engagement status of one pull request.

    Success dominates: a pull request with failed attempts and a later successful
    review is a successful review.
    """
    bot_comments = [c for c in pr.comments if _is_bot(c, rules)]
    successes = [c for c in bot_comments if rules.success_header in c.body]
    if successes:
        first_success_at = min(c.created_at for c in successes)
        return ClassifiedPR(
            pr=pr,
            status=EngagementStatus.SUCCESSFUL,
            first_success_at=first_success_at,
            actioned=any(c.committed_at > first_success_at for c in pr.commits),
        )

    signatures = [re.compile(s, re.MULTILINE) for s in rules.failure_signatures]
    if any(s.search(c.body) for c in bot_comments for s in signatures):
        return ClassifiedPR(pr=pr, status=EngagementStatus.FAILED)
    return ClassifiedPR(pr=pr, status=EngagementStatus.NONE)


def classify_all(dataset: Dataset, rules: ClassificationConfig) -> list[ClassifiedPR]:
    """Classify every pull request, keeping the dataset order."""
    return [classify(pr, rules) for pr in dataset.prs]


def _count(week: WeekIndex, items: list[ClassifiedPR]) -> WeeklyMetrics:
    statuses = [c.status for c in items]
    return WeeklyMetrics(
        week=week,
        n_success=statuses.count(EngagementStatus.SUCCESSFUL),
        n_failed=statuses.count(EngagementStatus.FAILED),
        n_none=statuses.count(EngagementStatus.NONE),
        n_actioned=sum(c.actioned for c in items),
    )


def weekly_metrics(classified: list[ClassifiedPR], cal: CohortCalendar) -> list[WeeklyMetrics]:
    """One row per semester week, plus an OutsideSemester row when it is not empty."""
    buckets: dict[WeekIndex, list[ClassifiedPR]] = defaultdict(list)
    for item in classified:
        buckets[week_of(item.pr.created_at, cal)].append(item)

    rows = []
    for k in range(1, cal.n_weeks + 1):
        week = WeekIndex(value=k)
        rows.append(_count(week, buckets.get(week, [])))
    outside = WeekIndex.outside()
    if buckets.get(outside):
        rows.append(_count(outside, buckets[outside]))
    return rows


def summarize(
    classified: list[ClassifiedPR],
    team_map: dict[str, str],
    rules: ClassificationConfig | None = None,
    cal: CohortCalendar | None = None,
) -> CohortSummary:
    """Cohort-level counts.

    A team uses the tool when at least one of its pull requests triggered the bot; with
    ``rules.strict_teams`` only successful reviews count.

    Raises:
        UnmappedPRError: if a pull request's repository has no team.
    """
    rules = rules or ClassificationConfig()
    using = {EngagementStatus.SUCCESSFUL}
    if not rules.strict_teams:
        using.add(EngagementStatus.FAILED)

    teams = set()
    teams_using = set()
    for item in classified:
        team = team_map.get(item.pr.repo_id)
        if team is None:
            raise UnmappedPRError(f"{item.pr.repo_id} has no team assignment")
        teams.add(team)
        if item.status in using:
            teams_using.add(team)

    statuses = [c.status for c in classified]
    return CohortSummary(
        cohort_label=cal.cohort_label if cal else "",
        teams_total=len(teams),
        teams_using_ai=len(teams_using),
        prs_total=len(classified),
        prs_success=statuses.count(EngagementStatus.SUCCESSFUL),
        prs_failed=statuses.count(EngagementStatus.FAILED),
        prs_none=statuses.count(EngagementStatus.NONE),
        prs_actioned=sum(c.actioned for c in classified),
        prs_outside_semester=sum(week_of(c.pr.created_at, cal).is_outside for c in classified)
        if cal
        else 0,
        commits_total=sum(len(c.pr.commits) for c in classified),
        comments_total=sum(len(c.pr.comments) for c in classified),
        bot_comments_total=sum(_is_bot(m, rules) for c in classified for m in c.pr.comments),
    )


def _read_jsonl(path: str) -> list[Row]:
    """Numbered records of a line-delimited JSON file; blank lines are skipped.

    Raises:
        SchemaError: if the file is missing or unreadable, or a line is not UTF-8 JSON.
    """
    if not os.path.isfile(path):
        raise SchemaError("record file not found", path=path)
    rows = []
    try:
        with open(path, "rb") as f:
            for n, raw in enumerate(f, start=1):
                if not raw.strip():
                    continue
                try:
                    rows.append((n, json.loads(raw.decode("utf-8"))))
                except UnicodeDecodeError as e:
                    raise SchemaError(f"not UTF-8 text: {e}", path=path, line=n) from e
                except ValueError as e:
                    raise SchemaError(f"not a JSON object: {e}", path=path, line=n) from e
    except OSError as e:
        raise SchemaError(f"cannot read: {e.strerror or e}", path=path) from e
    return rows


class _Assembler:
    """Validates rows and builds the dataset, shared by file and host ingest."""

    def __init__(self, cal: CohortCalendar, rules: ClassificationConfig, strict: bool):
        self.cal = cal
        self.rules = rules
        self.strict = strict
        self.report = IngestReport()

    def _drop(self, source: str, line: int, reason: str) -> None:
        if self.strict:
            raise SchemaError(reason, path=source, line=line)
        logger.warning(f"{source}:{line}: dropped, {reason}")
        self.report.dropped.append(DroppedRecord(source=source, line=line, reason=reason))

    def _valid(self, source: str, rows: list[Row], schema: dict) -> list[Row]:
        validator = Draft7Validator(schema)
        self.report.records_read[source] = len(rows)
        kept = []
        for line, row in rows:
            errors = sorted(validator.iter_errors(row), key=lambda e: list(e.path))
            if errors:
                self._drop(source, line, errors[0].message)
            else:
                kept.append((line, row))
        return kept

    def _heads(self, source: str, rows: list[Row]) -> dict[tuple[str, int], dict[str, Any]]:
        heads = {}
        for line, row in self._valid(source, rows, PR_SCHEMA):
            key = (row["repo_id"], row["number"])
            if key in heads:
                self._drop(source, line, f"duplicated pull request {key[0]}#{key[1]}")
                continue
            try:
                created_at = parse_instant(row["created_at"])
            except ValueError as e:
                self._drop(source, line, f"unparseable created_at: {e}")
                continue
            heads[key] = {
                "repo_id": key[0],
                "pr_number": key[1],
                "created_at": created_at,
                "author": row.get("author", ""),
                "comments": [],
                "commits": [],
                "shas": set(),
            }
        self.report.records_kept[source] = len(heads)
        return heads

    def _attach(
        self,
        source: str,
        rows: list[Row],
        schema: dict,
        heads: dict[tuple[str, int], dict[str, Any]],
        field: str,
        make: Callable[[dict[str, Any]], Any],
    ) -> None:
        kept = 0
        for line, row in self._valid(source, rows, schema):
            head = heads.get((row["repo_id"], row["pr_number"]))
            if head is None:
                self.report.orphans += 1
                continue
            try:
                record = make(row)
            except ValidationError as e:
                self._drop(source, line, f"invalid {field[:-1]}: {e.errors()[0]['msg']}")
                continue
            if isinstance(record, CommitRecord):
                if record.sha in head["shas"]:
                    self._drop(source, line, f"duplicated commit {record.sha}")
                    continue
                head["shas"].add(record.sha)
            head[field].append(record)
            kept += 1
        self.report.records_kept[source] = kept

    def _comment(self, row: dict[str, Any]) -> CommentRecord:
        return CommentRecord(
            author_login=row["author_login"],
            body=row["body"],
            created_at=row["created_at"],
            is_bot=row["author_login"] in self.rules.bot_logins,
        )

    @staticmethod
    def _commit(row: dict[str, Any]) -> CommitRecord:
        return CommitRecord(
            sha=row["sha"], message=row.get("message", ""), committed_at=row["committed_at"]
        )

    def build(
        self,
        prs: tuple[str, list[Row]],
        comments: tuple[str, list[Row]],
        commits: tuple[str, list[Row]],
    ) -> Dataset:
        """Validate every row and attach comments and commits to their pull request."""
        heads = self._heads(*prs)
        self._attach(*comments, COMMENT_SCHEMA, heads, "comments", self._comment)
        self._attach(*commits, COMMIT_SCHEMA, heads, "commits", self._commit)

        records = []
        for head in heads.values():
            head.pop("shas")
            records.append(PullRequestRecord(**head))
        records.sort(key=lambda p: (p.created_at, p.repo_id, p.pr_number))
        logger.info(
            f"Ingested {len(records)} pull requests for {self.cal.cohort_label}: "
            f"{self.report.dropped_total} dropped, {self.report.orphans} orphans"
        )
        return Dataset(cohort=self.cal, prs=records)


def read_team_map(path: str) -> dict[str, str]:
    """Load a repo_id -> team label map.

    Raises:
        SchemaError: if the file is not a JSON object of strings.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            team_map = json.load(f)
    except (OSError, ValueError) as e:
        raise SchemaError(f"cannot read team map: {e}", path=path) from e
    errors = list(Draft7Validator(TEAMS_SCHEMA).iter_errors(team_map))
    if errors:
        raise SchemaError(errors[0].message, path=path)
    return team_map


def identity_team_map(dataset: Dataset) -> dict[str, str]:
    """One team per repository."""
    return {pr.repo_id: pr.repo_id for pr in dataset.prs}


def ingest_files(
    data_dir: str,
    cal: CohortCalendar,
    rules: ClassificationConfig | None = None,
    strict: bool = False,
) -> tuple[Dataset, IngestReport, dict[str, str]]:
    """Read a directory of record files.

    The team map comes from ``teams.json`` when present, otherwise every repository
    is its own team.

    Raises:
        SchemaError: on unreadable files; in strict mode also on the first invalid record.
    """
    paths = [os.path.join(data_dir, name) for name in (PRS_FILE, COMMENTS_FILE, COMMITS_FILE)]
    assembler = _Assembler(cal, rules or ClassificationConfig(), strict)
    dataset = assembler.build(*((path, _read_jsonl(path)) for path in paths))

    teams_path = os.path.join(data_dir, TEAMS_FILE)
    team_map = (
        read_team_map(teams_path) if os.path.isfile(teams_path) else identity_team_map(dataset)
    )
    return dataset, assembler.report, team_map


def _numbered(rows: Iterable[dict[str, Any]]) -> list[Row]:
    return list(enumerate(rows, start=1))


def ingest_host(
    host: CodeHost,
    repos: list[str],
    cal: CohortCalendar,
    rules: ClassificationConfig | None = None,
    strict: bool = False,
) -> tuple[Dataset, IngestReport, dict[str, str]]:
    """Query the code host for every pull request of the repositories.

    Raises:
        HostUnreachableError: if the host fails.
    """
    prs, comments, commits = [], [], []
    for repo_id in repos:
        for pr in host.list_pull_requests(repo_id):
            prs.append(pr)
            comments.extend(host.list_comments(repo_id, pr["number"]))
            commits.extend(host.list_commits(repo_id, pr["number"]))
        logger.info(f"Fetched {repo_id} from the code host")

    assembler = _Assembler(cal, rules or ClassificationConfig(), strict)
    dataset = assembler.build(
        (PRS_FILE, _numbered(prs)),
        (COMMENTS_FILE, _numbered(comments)),
        (COMMITS_FILE, _numbered(commits)),
    )
    return dataset, assembler.report, identity_team_map(dataset)


def classified_row(item: ClassifiedPR, cal: CohortCalendar) -> dict[str, Any]:
    """Flat record of a classified pull request."""
    return {
        "repo_id": item.pr.repo_id,
        "pr_number": item.pr.pr_number,
        "created_at": format_instant(item.pr.created_at),
        "week": str(week_of(item.pr.created_at, cal)),
        "status": item.status.value,
        "first_success_at": format_instant(item.first_success_at)
        if item.first_success_at
        else None,
        "actioned": item.actioned,
        "commits": len(item.pr.commits),
        "comments": len(item.pr.comments),
    }


@contextmanager
def writing_to(target: str) -> Iterator[None]:
    """Raise OS errors met while writing `target` as OutputError."""
    try:
        yield
    except OSError as e:
        raise OutputError(f"cannot write {e.filename or target}: {e.strerror or e}") from e


@writing_to("classified records")
def write_classified(classified: list[ClassifiedPR], cal: CohortCalendar, path: str) -> None:
    """Write one JSON object per line, in input order."""
    with open(path, "w", encoding="utf-8") as f:
        for item in classified:
            f.write(json.dumps(classified_row(item, cal), sort_keys=True) + "\n")


@writing_to("ingest report")
def write_ingest_report(report: IngestReport, path: str) -> None:
    """Write the ingest report next to the outputs."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(report.json(indent=2, sort_keys=True))


@writing_to("record files")
def write_records(dataset: Dataset, team_map: dict[str, str], out_dir: str) -> None:
    """Write a dataset in the line-delimited record format read by ingest."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, PRS_FILE), "w", encoding="utf-8") as prs, open(
        os.path.join(out_dir, COMMENTS_FILE), "w", encoding="utf-8"
    ) as comments, open(os.path.join(out_dir, COMMITS_FILE), "w", encoding="utf-8") as commits:
        for pr in dataset.prs:
            prs.write(
                json.dumps(
                    {
                        "repo_id": pr.repo_id,
                        "number": pr.pr_number,
                        "created_at": format_instant(pr.created_at),
                        "author": pr.author,
                    }
                )
                + "\n"
            )
            for c in pr.comments:
                comments.write(
                    json.dumps(
                        {
                            "repo_id": pr.repo_id,
                            "pr_number": pr.pr_number,
                            "author_login": c.author_login,
                            "body": c.body,
                            "created_at": format_instant(c.created_at),
                        }
                    )
                    + "\n"
                )
            for c in pr.commits:
                commits.write(
                    json.dumps(
                        {
                            "repo_id": pr.repo_id,
                            "pr_number": pr.pr_number,
                            "sha": c.sha,
                            "message": c.message,
                            "committed_at": format_instant(c.committed_at),
                        }
                    )
                    + "\n"
                )
    with open(os.path.join(out_dir, TEAMS_FILE), "w", encoding="utf-8") as f:
        json.dump(team_map, f, indent=2, sort_keys=True)

