# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""The shared domain models.

Every other module depends on these types only. All of them are pydantic models and
are treated as immutable once built.
"""

import logging
import posixpath
import re
from datetime import date, datetime
from typing import Optional

from pydantic import BaseModel, Field, conint, root_validator, validator

from reviewer.core.instants import parse_instant
from reviewer.literals import (
    DEFAULT_BOT_LOGINS,
    DEFAULT_TIMEZONE,
    FAILURE_HEADER,
    SEMESTER_WEEKS,
    SUCCESS_HEADER,
    EngagementStatus,
    GuardrailOutcome,
    GuardrailRule,
    ReviewOutcome,
)

logger = logging.getLogger(__name__)

SHA_PATTERN = re.compile(r"^[0-9a-fA-F]{7,40}$")

DEFAULT_ALLOWED_EXTENSIONS = {
    "c",
    "cc",
    "cpp",
    "cs",
    "css",
    "go",
    "h",
    "hpp",
    "html",
    "java",
    "js",
    "jsx",
    "kt",
    "m",
    "php",
    "py",
    "rb",
    "rs",
    "scala",
    "scss",
    "sh",
    "sql",
    "swift",
    "ts",
    "tsx",
    "vue",
}
DEFAULT_DENIED_EXTENSIONS = {
    "7z",
    "bin",
    "bmp",
    "docx",
    "exe",
    "gif",
    "gz",
    "ico",
    "jar",
    "jpeg",
    "jpg",
    "mp4",
    "pdf",
    "png",
    "pptx",
    "svg",
    "tar",
    "xlsx",
    "zip",
}

# The failure comments this bot writes, plus common wording of other review bots
DEFAULT_FAILURE_SIGNATURES = [
    rf"^{re.escape(FAILURE_HEADER)}",
    r"(?i)\b(api[ _-]?key|credentials?)\b.*\b(missing|invalid|unauthori[sz]ed)\b",
    r"(?i)\bunsupported file type\b",
    r"(?i)\b(file|size|token) limit (exceeded|reached)\b",
]


def _utc(value):
    return parse_instant(value)


class WeekIndex(BaseModel):
    """A semester week, or the OutsideSemester sentinel when value is None."""

    value: Optional[conint(ge=1)] = None

    class Config:
        frozen = True

    @classmethod
    def outside(cls) -> "WeekIndex":
        """Return the OutsideSemester sentinel."""
        return cls(value=None)

    @property
    def is_outside(self) -> bool:
        """True for the OutsideSemester sentinel."""
        return self.value is None

    def sort_key(self) -> tuple[bool, int]:
        """In-range weeks first, ascending, then the sentinel."""
        return (self.value is None, self.value or 0)

    def __str__(self) -> str:
        """Return the label used in reports."""
        return "outside" if self.value is None else str(self.value)


class CohortCalendar(BaseModel):
    """Strict semester calendar of one cohort."""

    cohort_label: str
    week1_monday: date
    timezone_name: str = DEFAULT_TIMEZONE
    n_weeks: conint(ge=1) = SEMESTER_WEEKS

    class Config:
        frozen = True

    @validator("week1_monday")
    @classmethod
    def must_be_monday(cls, value: date) -> date:
        """Week 1 starts on a Monday."""
        if value.weekday() != 0:
            raise ValueError(f"{value} is not a Monday")
        return value


class CommentRecord(BaseModel):
    """A comment left on a pull request."""

    author_login: str
    body: str
    created_at: datetime
    is_bot: bool = False

    class Config:
        frozen = True

    _normalize = validator("created_at", pre=True, allow_reuse=True)(_utc)


class CommitRecord(BaseModel):
    """A commit that belongs to a pull request."""

    sha: str
    message: str = ""
    committed_at: datetime

    class Config:
        frozen = True

    _normalize = validator("committed_at", pre=True, allow_reuse=True)(_utc)

    @validator("sha")
    @classmethod
    def must_be_hex(cls, value: str) -> str:
        """Accept abbreviated and full hex shas."""
        if not SHA_PATTERN.match(value):
            raise ValueError(f"invalid commit sha: {value!r}")
        return value.lower()


class PullRequestRecord(BaseModel):
    """One pull request with its comments and commits, the unit of classification."""

    repo_id: str
    pr_number: conint(gt=0)
    created_at: datetime
    author: str = ""
    comments: list[CommentRecord] = []
    commits: list[CommitRecord] = []

    class Config:
        frozen = True

    _normalize = validator("created_at", pre=True, allow_reuse=True)(_utc)

    @validator("comments")
    @classmethod
    def sort_comments(cls, value: list[CommentRecord]) -> list[CommentRecord]:
        """Sort by timestamp; ties keep their input order."""
        return sorted(value, key=lambda c: c.created_at)

    @validator("commits")
    @classmethod
    def sort_commits(cls, value: list[CommitRecord]) -> list[CommitRecord]:
        """Sort by timestamp and reject repeated shas."""
        seen = set()
        for commit in value:
            if commit.sha in seen:
                raise ValueError(f"duplicated commit sha {commit.sha}")
            seen.add(commit.sha)
        return sorted(value, key=lambda c: c.committed_at)

    @property
    def key(self) -> tuple[str, int]:
        """Identity of the pull request within a dataset."""
        return (self.repo_id, self.pr_number)


class Dataset(BaseModel):
    """All pull requests of one cohort."""

    cohort: CohortCalendar
    prs: list[PullRequestRecord] = []

    @validator("prs")
    @classmethod
    def unique_prs(cls, value: list[PullRequestRecord]) -> list[PullRequestRecord]:
        """(repo_id, pr_number) is unique."""
        keys = [pr.key for pr in value]
        if len(keys) != len(set(keys)):
            raise ValueError("duplicated (repo_id, pr_number) in dataset")
        return value


class ClassificationConfig(BaseModel):
    """Rules used to derive the engagement status from the comments."""

    bot_logins: list[str] = list(DEFAULT_BOT_LOGINS)
    success_header: str = SUCCESS_HEADER
    failure_signatures: list[str] = DEFAULT_FAILURE_SIGNATURES
    strict_teams: bool = False

    @validator("failure_signatures", each_item=True)
    @classmethod
    def must_compile(cls, value: str) -> str:
        """Signatures are regular expressions."""
        try:
            re.compile(value)
        except re.error as e:
            raise ValueError(f"invalid failure signature {value!r}: {e}") from e
        return value

    @validator("success_header")
    @classmethod
    def not_empty(cls, value: str) -> str:
        """An empty header would match every comment."""
        if not value:
            raise ValueError("success_header must not be empty")
        return value


class ClassifiedPR(BaseModel):
    """A pull request together with its engagement status."""

    pr: PullRequestRecord
    status: EngagementStatus
    first_success_at: Optional[datetime] = None
    actioned: bool = False

    @root_validator(skip_on_failure=True)
    @classmethod
    def consistent(cls, values):
        """first_success_at and actioned only exist for successful reviews."""
        successful = values["status"] == EngagementStatus.SUCCESSFUL
        if successful != (values.get("first_success_at") is not None):
            raise ValueError("first_success_at is set iff the review was successful")
        if values.get("actioned") and not successful:
            raise ValueError("only successfully reviewed PRs can be actioned")
        return values


class WeeklyMetrics(BaseModel):
    """Composition counts and action rate of one week."""

    week: WeekIndex
    n_success: conint(ge=0) = 0
    n_failed: conint(ge=0) = 0
    n_none: conint(ge=0) = 0
    n_actioned: conint(ge=0) = 0
    action_rate: Optional[float] = None

    @root_validator(skip_on_failure=True)
    @classmethod
    def rate(cls, values):
        """The rate is derived from the counts and undefined without successes."""
        if values["n_actioned"] > values["n_success"]:
            raise ValueError("n_actioned cannot exceed n_success")
        values["action_rate"] = (
            values["n_actioned"] / values["n_success"] if values["n_success"] else None
        )
        return values

    @property
    def n_total(self) -> int:
        """All pull requests created in the week."""
        return self.n_success + self.n_failed + self.n_none


class CohortSummary(BaseModel):
    """Cohort-level engagement counts."""

    cohort_label: str = ""
    teams_total: conint(ge=0) = 0
    teams_using_ai: conint(ge=0) = 0
    prs_total: conint(ge=0) = 0
    prs_success: conint(ge=0) = 0
    prs_failed: conint(ge=0) = 0
    prs_none: conint(ge=0) = 0
    prs_actioned: conint(ge=0) = 0
    prs_outside_semester: conint(ge=0) = 0
    action_rate_overall: Optional[float] = None
    commits_total: conint(ge=0) = 0
    comments_total: conint(ge=0) = 0
    bot_comments_total: conint(ge=0) = 0

    @root_validator(skip_on_failure=True)
    @classmethod
    def rate(cls, values):
        """Check the ordering of the counts and derive the overall rate."""
        if not values["prs_actioned"] <= values["prs_success"] <= values["prs_total"]:
            raise ValueError("expected prs_actioned <= prs_success <= prs_total")
        values["action_rate_overall"] = (
            values["prs_actioned"] / values["prs_success"] if values["prs_success"] else None
        )
        return values


class ChangedFile(BaseModel):
    """A file changed by a pull request, as reported by the code host."""

    path: str
    added_lines: conint(ge=0) = 0
    removed_lines: conint(ge=0) = 0
    status: str = "modified"
    patch: Optional[str] = None
    content: Optional[bytes] = None

    @validator("path")
    @classmethod
    def not_empty(cls, value: str) -> str:
        """Paths are non-empty."""
        if not value.strip():
            raise ValueError("empty path")
        return value

    @property
    def changed_lines(self) -> int:
        """Added plus removed lines."""
        return self.added_lines + self.removed_lines

    @property
    def extension(self) -> str:
        """Lower-case suffix without the dot, empty when there is none."""
        _, ext = posixpath.splitext(posixpath.basename(self.path))
        return ext[1:].lower()


class GuardrailPolicy(BaseModel):
    """Limits and file-type rules applied before a review runs."""

    allowed_extensions: set[str] = DEFAULT_ALLOWED_EXTENSIONS
    denied_extensions: set[str] = DEFAULT_DENIED_EXTENSIONS
    max_files_per_review: conint(ge=1) = 25
    max_changed_lines_per_file: conint(ge=1) = 800
    max_total_changed_lines: conint(ge=1) = 3000
    require_credentials: bool = True

    @validator("allowed_extensions", "denied_extensions", pre=True)
    @classmethod
    def normalize(cls, value):
        """Extensions are compared lower-case and without the leading dot."""
        return {ext.lower().lstrip(".") for ext in value}

    @root_validator(skip_on_failure=True)
    @classmethod
    def disjoint(cls, values):
        """An extension cannot be both allowed and denied."""
        if overlap := values["allowed_extensions"] & values["denied_extensions"]:
            raise ValueError(f"extensions both allowed and denied: {sorted(overlap)}")
        return values


class Rejection(BaseModel):
    """A single violated rule."""

    rule: GuardrailRule
    message: str
    item: Optional[str] = None

    @validator("message")
    @classmethod
    def not_empty(cls, value: str) -> str:
        """Every rejection tells the user how to fix it."""
        if not value.strip():
            raise ValueError("rejections need a remediation message")
        return value


class GuardrailVerdict(BaseModel):
    """Result of the pre-flight checks."""

    outcome: GuardrailOutcome = GuardrailOutcome.PASS
    rejections: list[Rejection] = []

    @root_validator(skip_on_failure=True)
    @classmethod
    def derive_outcome(cls, values):
        """Reject iff there is at least one rejection."""
        values["outcome"] = (
            GuardrailOutcome.REJECT if values["rejections"] else GuardrailOutcome.PASS
        )
        return values

    @property
    def passed(self) -> bool:
        """True when no rule was violated."""
        return self.outcome == GuardrailOutcome.PASS

    @property
    def rules(self) -> list[GuardrailRule]:
        """Violated rules, without repetition, in first-seen order."""
        return list(dict.fromkeys(r.rule for r in self.rejections))

    def merge(self, *others: "GuardrailVerdict") -> "GuardrailVerdict":
        """Concatenate the rejections of several verdicts, keeping their order."""
        rejections = list(self.rejections)
        for other in others:
            rejections.extend(other.rejections)
        return GuardrailVerdict(rejections=rejections)


class ChecklistItem(BaseModel):
    """One lettered item of a checklist category."""

    letter: str
    name: str
    instruction: str


class ChecklistCategory(BaseModel):
    """One numbered category of the review checklist."""

    index: conint(ge=1, le=8)
    title: str
    items: list[ChecklistItem]


class ReviewRequest(BaseModel):
    """A rendered prompt for one file, or one part of a file."""

    file_path: str
    code_payload: str
    prompt_text: str
    part: conint(ge=1) = 1
    parts: conint(ge=1) = 1


class TriggerEvent(BaseModel):
    """A request to review one pull request."""

    repo_id: str
    pr_number: conint(gt=0)
    head_sha: str
    delivery_id: str

    @validator("head_sha")
    @classmethod
    def must_be_hex(cls, value: str) -> str:
        """Head shas are hex strings."""
        if not SHA_PATTERN.match(value):
            raise ValueError(f"invalid head sha: {value!r}")
        return value

    @validator("delivery_id")
    @classmethod
    def not_empty(cls, value: str) -> str:
        """Deliveries are identified."""
        if not value.strip():
            raise ValueError("empty delivery_id")
        return value

    @property
    def pr_key(self) -> tuple[str, int]:
        """Key used to serialize the processing of one pull request."""
        return (self.repo_id, self.pr_number)


class PostedComment(BaseModel):
    """A comment accepted by the code host."""

    comment_id: str
    posted_at: datetime
    body: str

    _normalize = validator("posted_at", pre=True, allow_reuse=True)(_utc)


class ReviewResult(BaseModel):
    """Outcome of the review of one file."""

    file_path: str
    outcome: ReviewOutcome
    comment_body: Optional[str] = None
    failure_rule: Optional[str] = None
    failure_message: Optional[str] = None
    posted_at: Optional[datetime] = None

    @root_validator(skip_on_failure=True)
    @classmethod
    def consistent(cls, values):
        """Posted results carry the header, failed ones carry the reason."""
        if values["outcome"] == ReviewOutcome.POSTED:
            body = values.get("comment_body") or ""
            if not body.startswith(f"{SUCCESS_HEADER}{values['file_path']}"):
                raise ValueError("posted comments start with the review header")
            if values.get("posted_at") is None:
                raise ValueError("posted comments have a timestamp")
        elif not (values.get("failure_rule") and values.get("failure_message")):
            raise ValueError("failed results carry a rule and a message")
        return values


class DroppedRecord(BaseModel):
    """An input record left out during ingest."""

    source: str
    line: int
    reason: str


class IngestReport(BaseModel):
    """What ingest read, kept and dropped."""

    records_read: dict[str, int] = {}
    records_kept: dict[str, int] = {}
    dropped: list[DroppedRecord] = []
    orphans: int = 0

    @property
    def dropped_total(self) -> int:
        """Number of dropped records."""
        return len(self.dropped)


class CohortReport(BaseModel):
    """Everything reported for one cohort."""

    cohort_label: str
    summary: CohortSummary
    weekly: list[WeeklyMetrics] = Field(default_factory=list)
    outside: Optional[WeeklyMetrics] = None

    @validator("weekly")
    @classmethod
    def weeks_in_order(cls, value: list[WeeklyMetrics]) -> list[WeeklyMetrics]:
        """The series cover consecutive weeks starting at 1."""
        expected = list(range(1, len(value) + 1))
        if [w.week.value for w in value] != expected:
            raise ValueError("weekly series must cover weeks 1..n in order")
        return value

    def composition_series(self) -> list[tuple[int, int, int, int]]:
        """(week, n_success, n_failed, n_none) rows."""
        return [(w.week.value, w.n_success, w.n_failed, w.n_none) for w in self.weekly]

    def action_rate_series(self) -> list[tuple[int, Optional[float], int]]:
        """(week, rate, weight) rows; the weight is the number of successful reviews."""
        return [(w.week.value, w.action_rate, w.n_success) for w in self.weekly]


class ReportBundle(BaseModel):
    """Reports of every cohort, in the order they were given."""

    cohorts: list[CohortReport] = []


class MetricDelta(BaseModel):
    """Difference of one metric between two cohorts."""

    metric: str
    a: Optional[float] = None
    b: Optional[float] = None
    absolute: Optional[float] = None
    ratio: Optional[float] = None


class CohortComparison(BaseModel):
    """Deltas between two cohorts."""

    label_a: str
    label_b: str
    rows: list[MetricDelta] = []
    zero_friction: bool = False
    weeks_failures_zeroed: list[int] = []
