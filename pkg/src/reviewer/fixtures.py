# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Shipped synthetic fixtures.

* `pr129_record` / `pr129_snapshot`: the trace of one actioned review, four bot
  comments in two seconds followed by ten commits over forty minutes.
* `cohort_dataset`: two synthetic cohorts whose aggregates match the published 2023
  and 2024 engagement counts. The raw course data is not public; the generators only
  reproduce its totals and weekly shape.
* `closed_loop_snapshot`: twenty pull requests of code files for the bot round-trip.

Everything here is deterministic.
"""

import hashlib
import logging
import os
from datetime import datetime, timedelta
from itertools import cycle
from typing import Iterator

from pydantic import BaseModel, root_validator

from reviewer.core.calendar import load_calendar, week_bounds
from reviewer.core.instants import format_instant, parse_instant
from reviewer.core.models import (
    CohortCalendar,
    CommentRecord,
    CommitRecord,
    Dataset,
    PullRequestRecord,
)
from reviewer.literals import FAILURE_HEADER, SUCCESS_HEADER
from reviewer.managers.host import Clock, Snapshot, SnapshotFile, SnapshotPull

logger = logging.getLogger(__name__)

PR129_REPO = "team-08-2024/manuscript-portal"
PR129_NUMBER = 129
PR129_CREATED_AT = "2024-05-14T06:52:10Z"
PR129_BOT = "github-actions[bot]"
PR129_FILES = [
    "src/components/Form.js",
    "src/pages/ManuscriptSubmission.js",
    "src/pages/ThirdPageSubmission.js",
    "src/services/submission.service.js",
]
PR129_COMMENT_TIMES = [
    "2024-05-14T07:08:35Z",
    "2024-05-14T07:08:36Z",
    "2024-05-14T07:08:36Z",
    "2024-05-14T07:08:37Z",
]
PR129_COMMIT_TIMES = [
    "2024-05-14T07:14:21Z",
    "2024-05-14T07:20:07Z",
    "2024-05-14T07:24:38Z",
    "2024-05-14T07:28:26Z",
    "2024-05-14T07:31:57Z",
    "2024-05-14T07:34:44Z",
    "2024-05-14T07:37:03Z",
    "2024-05-14T07:39:11Z",
    "2024-05-14T07:42:33Z",
    "2024-05-14T07:47:11Z",
]
PR129_COMMIT_MESSAGES = [
    "Rename form state variables",
    "Add comments to submission handlers",
    "Fix indentation in ManuscriptSubmission",
    "Remove unused imports",
    "Extract duplicated validation into helper",
    "Validate uploaded file type",
    "Initialise author list before use",
    "Pass journal id to submission service",
    "Handle empty abstract",
    "Simplify page navigation logic",
]

SAMPLE_REVIEW = (
    "1. Documentation Defects: consider more descriptive state names.\n"
    "2. Visual Representation Defects: a few long JSX lines.\n"
    "3. Structure Defects: validation is duplicated across pages.\n"
    "4. New Functionality: none.\n"
    "5. Resource Defects: initialise the author list.\n"
    "6. Check Defects: validate the uploaded file type.\n"
    "7. Interface Defects: the journal id is not passed to the service.\n"
    "8. Logic Defects: navigation logic can be simplified."
)

FAILURE_BODIES = [
    f"{FAILURE_HEADER}\n\n- **credentials** `OPENAI_API_KEY`: No API key found for the review bot.",
    f"{FAILURE_HEADER}\n\n- **artifact-type** `docs/wireframe.png`: .png is a non-code artefact.",
    f"{FAILURE_HEADER}\n\n- **file-limit** `src/App.js`: changed lines exceed the per-file limit.",
]
HUMAN_COMMENTS = [
    "Looks good to me.",
    "Can you add a test for this?",
    "Merged after the stand-up.",
    "Please rebase on main.",
]


def _sha(*parts) -> str:
    return hashlib.sha1("/".join(str(p) for p in parts).encode("utf-8")).hexdigest()


def _js_source(path: str) -> str:
    name = os.path.splitext(os.path.basename(path))[0].split(".")[0]
    return (
        f"// {name}\n"
        f"export function {name}(props) {{\n"
        f"  const data = props.data;\n"
        f"  if (!data) {{\n"
        f"    return null;\n"
        f"  }}\n"
        f"  return data;\n"
        f"}}\n"
    )


def pr129_record() -> PullRequestRecord:
    """The golden trace as the telemetry pipeline sees it."""
    return PullRequestRecord(
        repo_id=PR129_REPO,
        pr_number=PR129_NUMBER,
        created_at=PR129_CREATED_AT,
        author="student-08",
        comments=[
            CommentRecord(
                author_login=PR129_BOT,
                body=f"{SUCCESS_HEADER}{path}:\n{SAMPLE_REVIEW}",
                created_at=at,
                is_bot=True,
            )
            for path, at in zip(PR129_FILES, PR129_COMMENT_TIMES)
        ],
        commits=[
            CommitRecord(sha=_sha(PR129_REPO, i), message=message, committed_at=at)
            for i, (message, at) in enumerate(zip(PR129_COMMIT_MESSAGES, PR129_COMMIT_TIMES))
        ],
    )


def pr129_snapshot() -> Snapshot:
    """The pull request before the bot ran: four changed files and the follow-up commits."""
    return Snapshot(
        repos={
            PR129_REPO: [
                SnapshotPull(
                    number=PR129_NUMBER,
                    created_at=PR129_CREATED_AT,
                    author="student-08",
                    head_sha=_sha(PR129_REPO, "head"),
                    files=[
                        SnapshotFile(
                            path=path,
                            added_lines=8,
                            removed_lines=2,
                            status="modified",
                            content=_js_source(path),
                        )
                        for path in PR129_FILES
                    ],
                    commits=[
                        {
                            "sha": _sha(PR129_REPO, i),
                            "message": message,
                            "committed_at": at,
                        }
                        for i, (message, at) in enumerate(
                            zip(PR129_COMMIT_MESSAGES, PR129_COMMIT_TIMES)
                        )
                    ],
                )
            ]
        }
    )


def scripted_clock(instants: list[str]) -> Clock:
    """Clock returning the given instants in order, then repeating the last one."""
    parsed = [parse_instant(i) for i in instants]
    state: Iterator[datetime] = iter(parsed)

    def now() -> datetime:
        return next(state, parsed[-1])

    return now


class CohortProfile(BaseModel):
    """Target aggregates of a synthetic cohort.

    The per-week dictionaries map a semester week to a count of pull requests created
    that week.
    """

    calendar: str
    teams_total: int
    teams_using_ai: int
    weekly_prs: list[int]
    success_by_week: dict[int, int]
    actioned_by_week: dict[int, int]
    failed_by_week: dict[int, int] = {}
    commits_total: int
    comments_total: int
    bot_login: str

    @root_validator(skip_on_failure=True)
    @classmethod
    def feasible(cls, values):
        """Every week fits its statuses and every pull request gets a commit."""
        weekly = values["weekly_prs"]
        for week, n_prs in enumerate(weekly, start=1):
            success = values["success_by_week"].get(week, 0)
            if values["actioned_by_week"].get(week, 0) > success:
                raise ValueError(f"week {week}: more actioned than successful reviews")
            if success + values["failed_by_week"].get(week, 0) > n_prs:
                raise ValueError(f"week {week}: more AI attempts than pull requests")
        if values["commits_total"] < sum(weekly):
            raise ValueError("every pull request needs a commit")
        if values["teams_using_ai"] > values["teams_total"]:
            raise ValueError("more teams using the tool than teams")
        return values

    @property
    def prs_total(self) -> int:
        """Pull requests of the cohort."""
        return sum(self.weekly_prs)


def _weeks(start: int, counts: list[int]) -> dict[int, int]:
    return {week: n for week, n in enumerate(counts, start=start)}


PROFILES = {
    "2023": CohortProfile(
        calendar="2023",
        teams_total=29,
        teams_using_ai=27,
        weekly_prs=[4, 8, 18, 26, 32, 38, 45, 70, 62, 66, 74, 68, 40, 30],
        success_by_week=_weeks(7, [4, 8, 10, 12, 14, 12, 8, 7]),
        actioned_by_week=_weeks(7, [1, 2, 4, 5, 5, 2, 2, 3]),
        failed_by_week=_weeks(7, [20, 30, 28, 32, 60, 30, 15, 12]),
        commits_total=8699,
        comments_total=1698,
        bot_login="cr-gpt[bot]",
    ),
    "2024": CohortProfile(
        calendar="2024",
        teams_total=34,
        teams_using_ai=17,
        weekly_prs=[6, 14, 30, 48, 62, 80, 96, 190, 130, 140, 150, 128, 58, 44],
        success_by_week=_weeks(7, [5, 14, 16, 18, 17, 14, 9, 7]),
        actioned_by_week=_weeks(7, [1, 4, 6, 7, 7, 3, 5, 0]),
        commits_total=9436,
        comments_total=2872,
        bot_login="github-actions[bot]",
    ),
}


def _spread(total: int, n: int) -> list[int]:
    base, extra = divmod(total, n)
    return [base + (1 if i < extra else 0) for i in range(n)]


def _created_at(cal: CohortCalendar, week: int, j: int, n: int) -> datetime:
    """Midpoint of the j-th of n equal slots of the week, in local wall-clock time."""
    start, _ = week_bounds(cal, week)
    return start + timedelta(seconds=(2 * j + 1) * 7 * 86400 // (2 * n))


def _plan(profile: CohortProfile, cal: CohortCalendar) -> list[tuple[datetime, str, bool]]:
    """(created_at, status, actioned) of every pull request, in creation order."""
    plan = []
    for week, n_prs in enumerate(profile.weekly_prs, start=1):
        success = profile.success_by_week.get(week, 0)
        actioned = profile.actioned_by_week.get(week, 0)
        failed = profile.failed_by_week.get(week, 0)
        for j in range(n_prs):
            status = "success" if j < success else "failed" if j < success + failed else "none"
            plan.append((_created_at(cal, week, j, n_prs), status, j < actioned))
    return plan


def cohort_dataset(label: str) -> tuple[Dataset, dict[str, str]]:
    """Synthetic dataset of a cohort and its team map.

    AI pull requests go round-robin to the teams using the tool; the others are spread
    over every team. Each AI pull request carries exactly one bot comment. Actioned
    reviews are followed by all the commits of the pull request, the other reviews come
    after the last commit.
    """
    profile = PROFILES[label]
    cal = load_calendar(profile.calendar)
    teams = [f"team-{t + 1:02d}-{label}" for t in range(profile.teams_total)]
    plan = _plan(profile, cal)

    ai_teams = cycle(teams[: profile.teams_using_ai])
    all_teams = cycle(teams)
    commits = _spread(profile.commits_total, len(plan))
    n_bot = sum(1 for _, status, _ in plan if status != "none")
    humans = _spread(profile.comments_total - n_bot, len(plan))
    next_number: dict[str, int] = {}
    failures = cycle(FAILURE_BODIES)
    minute = timedelta(minutes=1)

    prs = []
    for i, (created_at, status, actioned) in enumerate(plan):
        team = next(ai_teams) if status != "none" else next(all_teams)
        repo_id = f"{team}/project"
        number = next_number[repo_id] = next_number.get(repo_id, 0) + 1
        first_commit = 2 if actioned else 1

        comments = [
            CommentRecord(
                author_login=f"student-{team}",
                body=HUMAN_COMMENTS[(i + c) % len(HUMAN_COMMENTS)],
                created_at=created_at + (commits[i] + 2 + c) * minute,
            )
            for c in range(humans[i])
        ]
        if status == "success":
            comments.append(
                CommentRecord(
                    author_login=profile.bot_login,
                    body=f"{SUCCESS_HEADER}src/module_{number}.js:\n{SAMPLE_REVIEW}",
                    created_at=created_at + (1 if actioned else commits[i] + 1) * minute,
                    is_bot=True,
                )
            )
        elif status == "failed":
            comments.append(
                CommentRecord(
                    author_login=profile.bot_login,
                    body=next(failures),
                    created_at=created_at + minute,
                    is_bot=True,
                )
            )
        prs.append(
            PullRequestRecord(
                repo_id=repo_id,
                pr_number=number,
                created_at=created_at,
                author=f"student-{team}",
                comments=comments,
                commits=[
                    CommitRecord(
                        sha=_sha(label, repo_id, number, c),
                        message=f"Commit {c + 1}",
                        committed_at=created_at + (first_commit + c) * minute,
                    )
                    for c in range(commits[i])
                ],
            )
        )

    team_map = {f"{team}/project": team for team in teams}
    logger.debug(f"Generated {len(prs)} pull requests for cohort {label}")
    return Dataset(cohort=cal, prs=prs), team_map


CLOSED_LOOP_SOURCES = {
    "py": "def add(a, b):\n    return a + b\n",
    "js": "function add(a, b) {\n  return a + b;\n}\n",
    "java": "class Adder {\n  int add(int a, int b) { return a + b; }\n}\n",
}


def closed_loop_snapshot(n_prs: int = 20, repo_id: str = "team-01-2024/project") -> Snapshot:
    """Pull requests whose changes are all code files, one to three per pull request."""
    extensions = list(CLOSED_LOOP_SOURCES)
    pulls = []
    for n in range(1, n_prs + 1):
        files = []
        for k in range(1 + n % 3):
            ext = extensions[(n + k) % len(extensions)]
            content = CLOSED_LOOP_SOURCES[ext]
            files.append(
                SnapshotFile(
                    path=f"src/pr{n}/file{k}.{ext}",
                    added_lines=content.count("\n"),
                    content=content,
                )
            )
        pulls.append(
            SnapshotPull(
                number=n,
                created_at=format_instant(datetime(2024, 5, 1, 9, 0) + timedelta(hours=n)),
                author="student",
                head_sha=_sha(repo_id, n, "head"),
                files=files,
            )
        )
    return Snapshot(repos={repo_id: pulls})
