#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

import json
import os
import random
from collections import Counter
from datetime import datetime, timedelta, timezone

import pandas as pd
import pytest
from parameterized import parameterized

from reviewer.core.calendar import week_of
from reviewer.core.models import (
    ClassificationConfig,
    CommentRecord,
    CommitRecord,
    Dataset,
    PullRequestRecord,
)
from reviewer.fixtures import (
    FAILURE_BODIES,
    PR129_BOT,
    PR129_COMMENT_TIMES,
    PR129_NUMBER,
    PR129_REPO,
    cohort_dataset,
    pr129_record,
    pr129_snapshot,
    scripted_clock,
)
from reviewer.literals import (
    FAILURE_HEADER,
    SUCCESS_HEADER,
    EngagementStatus,
    OutputError,
    SchemaError,
    UnmappedPRError,
)
from reviewer.managers.host import SnapshotHost
from reviewer.managers.runner import format_review
from reviewer.managers.telemetry import (
    classified_row,
    classify,
    classify_all,
    ingest_files,
    ingest_host,
    summarize,
    weekly_metrics,
    write_records,
)

CREATED = "2024-05-14T06:52:10Z"
REVIEWED = datetime(2024, 5, 14, 7, 8, 35, tzinfo=timezone.utc)
BOTS = ["cr-gpt[bot]", "github-actions[bot]"]


def record(comments=(), commits=(), repo_id="o/r", number=1, created_at=CREATED):
    return PullRequestRecord(
        repo_id=repo_id,
        pr_number=number,
        created_at=created_at,
        comments=[CommentRecord(author_login=a, body=b, created_at=t) for a, b, t in comments],
        commits=[
            CommitRecord(sha=f"{k:07x}", committed_at=t) for k, t in enumerate(commits, start=1)
        ],
    )


def test_pr129_golden_trace(cal_2024, rules):
    verdict = classify(pr129_record(), rules)
    assert verdict.status == EngagementStatus.SUCCESSFUL
    assert verdict.first_success_at == REVIEWED
    assert verdict.actioned
    assert week_of(verdict.pr.created_at, cal_2024).value == 8
    assert classified_row(verdict, cal_2024) == {
        "repo_id": PR129_REPO,
        "pr_number": PR129_NUMBER,
        "created_at": CREATED,
        "week": "8",
        "status": "successful_ai_review",
        "first_success_at": "2024-05-14T07:08:35Z",
        "actioned": True,
        "commits": 10,
        "comments": 4,
    }


@parameterized.expand(
    [
        (timedelta(seconds=-1), False),
        (timedelta(0), False),
        (timedelta(seconds=1), True),
    ]
)
def test_actioned_is_strictly_after(offset, actioned):
    pr = record(
        comments=[(PR129_BOT, format_review("a.py", "ok"), REVIEWED)],
        commits=[REVIEWED + offset],
    )
    assert classify(pr, ClassificationConfig()).actioned is actioned


def test_first_success_is_the_earliest(rules):
    later = REVIEWED + timedelta(minutes=30)
    pr = record(
        comments=[
            (PR129_BOT, format_review("b.py", "ok"), later),
            (PR129_BOT, format_review("a.py", "ok"), REVIEWED),
        ],
        commits=[REVIEWED + timedelta(minutes=10)],
    )
    verdict = classify(pr, rules)
    assert verdict.first_success_at == REVIEWED
    assert verdict.actioned


def test_success_dominates_failure(rules):
    pr = record(
        comments=[
            (PR129_BOT, FAILURE_BODIES[0], REVIEWED),
            (PR129_BOT, format_review("a.py", "ok"), REVIEWED + timedelta(hours=1)),
        ]
    )
    assert classify(pr, rules).status == EngagementStatus.SUCCESSFUL


@parameterized.expand([(body,) for body in FAILURE_BODIES])
def test_failure_signatures(body):
    pr = record(comments=[("cr-gpt[bot]", body, REVIEWED)], commits=[REVIEWED])
    verdict = classify(pr, ClassificationConfig())
    assert verdict.status == EngagementStatus.FAILED
    assert not verdict.actioned


def test_third_party_bot_errors():
    body = "Error: OPENAI_API_KEY credentials missing for this workflow"
    pr = record(comments=[("cr-gpt[bot]", body, REVIEWED)])
    assert classify(pr, ClassificationConfig()).status == EngagementStatus.FAILED


def test_humans_do_not_count(rules):
    pr = record(
        comments=[
            ("student", format_review("a.py", "pasted by hand"), REVIEWED),
            ("student", FAILURE_BODIES[0], REVIEWED),
            (PR129_BOT, "Thanks for the contribution!", REVIEWED),
        ],
        commits=[REVIEWED + timedelta(minutes=5)],
    )
    assert classify(pr, rules).status == EngagementStatus.NONE


def test_custom_rules():
    pr = record(comments=[("reviewbot", "Code review: looks fine", REVIEWED)])
    rules = ClassificationConfig(bot_logins=["reviewbot"], success_header="Code review:")
    assert classify(pr, rules).status == EngagementStatus.SUCCESSFUL
    assert classify(pr, ClassificationConfig()).status == EngagementStatus.NONE


def oracle_status(pr):
    bot = [c for c in pr.comments if c.author_login in BOTS]
    reviews = [c.created_at for c in bot if SUCCESS_HEADER in c.body]
    if reviews:
        first = min(reviews)
        return "success", any(c.committed_at > first for c in pr.commits)
    if any(c.body.startswith(FAILURE_HEADER) for c in bot):
        return "failed", False
    return "none", False


def oracle_week(instant):
    local_day = pd.Timestamp(instant).tz_convert("Australia/Melbourne").date()
    days = (local_day - datetime(2024, 3, 25).date()).days
    return days // 7 + 1 if 0 <= days < 98 else None


def random_dataset(rng, cal):
    authors = BOTS + ["student", "tutor"]
    bodies = [
        format_review("src/a.py", "1. ok"),
        FAILURE_BODIES[rng.randrange(len(FAILURE_BODIES))],
        "looks good",
        f"Quoting the bot: {SUCCESS_HEADER}src/b.py",
    ]
    start = datetime(2024, 3, 20, tzinfo=timezone.utc)
    prs = []
    for n in range(1, rng.randint(1, 500) + 1):
        created = start + timedelta(minutes=rng.randrange(0, 110 * 24 * 60))

        def minutes():
            return created + timedelta(minutes=rng.randrange(0, 120))

        prs.append(
            record(
                comments=[
                    (rng.choice(authors), rng.choice(bodies), minutes())
                    for _ in range(rng.randint(0, 4))
                ],
                commits=[minutes() for _ in range(rng.randint(0, 40))],
                repo_id=f"team-{rng.randint(1, 5)}/project",
                number=n,
                created_at=created,
            )
        )
    return Dataset(cohort=cal, prs=prs)


def test_classification_oracle(cal_2024, rules):
    rng = random.Random(20240514)
    names = {
        EngagementStatus.SUCCESSFUL: "success",
        EngagementStatus.FAILED: "failed",
        EngagementStatus.NONE: "none",
    }
    for _ in range(100):
        dataset = random_dataset(rng, cal_2024)
        classified = classify_all(dataset, rules)
        verdicts = [oracle_status(pr) for pr in dataset.prs]
        assert [(names[c.status], c.actioned) for c in classified] == verdicts

        expected = Counter()
        for pr, (status, actioned) in zip(dataset.prs, verdicts):
            week = oracle_week(pr.created_at)
            expected[(week, status)] += 1
            expected[(week, "actioned")] += actioned

        rows = weekly_metrics(classified, cal_2024)
        assert sum(w.n_total for w in rows) == len(dataset.prs)
        for w in rows:
            assert w.n_success == expected[(w.week.value, "success")]
            assert w.n_failed == expected[(w.week.value, "failed")]
            assert w.n_none == expected[(w.week.value, "none")]
            assert w.n_actioned == expected[(w.week.value, "actioned")]
            n_success = expected[(w.week.value, "success")]
            assert w.action_rate == (
                expected[(w.week.value, "actioned")] / n_success if n_success else None
            )

        total_success = sum(status == "success" for status, _ in verdicts)
        total_actioned = sum(actioned for _, actioned in verdicts)
        team_map = {pr.repo_id: pr.repo_id for pr in dataset.prs}
        summary = summarize(classified, team_map, rules, cal_2024)
        assert (summary.prs_success, summary.prs_actioned) == (total_success, total_actioned)
        assert summary.action_rate_overall == (
            total_actioned / total_success if total_success else None
        )


def test_weekly_rows(cal_2024, rules):
    inside = classify(pr129_record(), rules)
    rows = weekly_metrics([inside], cal_2024)
    assert [w.week.value for w in rows] == list(range(1, 15))
    assert rows[7].n_success == rows[7].n_actioned == 1
    assert rows[7].action_rate == 1.0
    assert rows[0].action_rate is None

    outside = classify(record(created_at="2024-08-01T00:00:00Z"), rules)
    rows = weekly_metrics([inside, outside], cal_2024)
    assert len(rows) == 15
    assert rows[-1].week.is_outside
    assert rows[-1].n_none == 1


@parameterized.expand(
    [
        ("2023", 29, 27, 581, 75, 227, 279, 24, 8699, 1698, 302),
        ("2024", 34, 17, 1176, 100, 0, 1076, 33, 9436, 2872, 100),
    ]
)
def test_cohort_totals(
    label, teams, using, total, success, failed, none, actioned, commits, comments, bot_comments
):
    dataset, team_map = cohort_dataset(label)
    rules = ClassificationConfig()
    summary = summarize(classify_all(dataset, rules), team_map, rules, dataset.cohort)
    assert summary.dict() == {
        "cohort_label": label,
        "teams_total": teams,
        "teams_using_ai": using,
        "prs_total": total,
        "prs_success": success,
        "prs_failed": failed,
        "prs_none": none,
        "prs_actioned": actioned,
        "prs_outside_semester": 0,
        "action_rate_overall": actioned / success,
        "commits_total": commits,
        "comments_total": comments,
        "bot_comments_total": bot_comments,
    }


def test_cohort_2024_weekly_shape():
    dataset, _ = cohort_dataset("2024")
    rows = weekly_metrics(classify_all(dataset, ClassificationConfig()), dataset.cohort)
    assert rows[7].n_total == 190
    assert sum(w.n_success for w in rows[:6]) == 0
    assert all(w.n_failed == 0 for w in rows)


def test_strict_teams(rules):
    failed_only = classify(record(comments=[(PR129_BOT, FAILURE_BODIES[0], REVIEWED)]), rules)
    team_map = {"o/r": "team-a"}
    assert summarize([failed_only], team_map, rules).teams_using_ai == 1
    strict = ClassificationConfig(strict_teams=True)
    assert summarize([failed_only], team_map, strict).teams_using_ai == 0


def test_unmapped_repository(rules):
    with pytest.raises(UnmappedPRError):
        summarize([classify(record(), rules)], {"other/repo": "team-b"}, rules)


def write_lines(path, *lines):
    path.write_text("".join(f"{line}\n" for line in lines))


@pytest.fixture
def messy_dir(tmp_path):
    pr = {"repo_id": "o/r", "number": 1, "created_at": CREATED}
    write_lines(
        tmp_path / "prs.jsonl",
        json.dumps(pr),
        json.dumps({**pr, "number": 0}),
        "",
        json.dumps(pr),
        json.dumps({**pr, "number": 2, "created_at": "not a time"}),
    )
    comment = {
        "repo_id": "o/r",
        "pr_number": 1,
        "author_login": PR129_BOT,
        "body": format_review("a.py", "ok"),
        "created_at": "2024-05-14T07:08:35Z",
    }
    write_lines(
        tmp_path / "comments.jsonl",
        json.dumps(comment),
        json.dumps({**comment, "pr_number": 9}),
        json.dumps({k: v for k, v in comment.items() if k != "body"}),
    )
    commit = {
        "repo_id": "o/r",
        "pr_number": 1,
        "sha": "abc1234",
        "committed_at": "2024-05-14T07:30:00Z",
    }
    write_lines(
        tmp_path / "commits.jsonl",
        json.dumps(commit),
        json.dumps(commit),
        json.dumps({**commit, "sha": "xyz"}),
    )
    return tmp_path


def test_ingest_drops_and_counts(messy_dir, cal_2024, rules):
    dataset, report, team_map = ingest_files(str(messy_dir), cal_2024, rules)

    assert [pr.key for pr in dataset.prs] == [("o/r", 1)]
    assert classify(dataset.prs[0], rules).actioned
    assert sorted((os.path.basename(d.source), d.line) for d in report.dropped) == [
        ("comments.jsonl", 3),
        ("commits.jsonl", 2),
        ("commits.jsonl", 3),
        ("prs.jsonl", 2),
        ("prs.jsonl", 4),
        ("prs.jsonl", 5),
    ]
    assert report.orphans == 1
    assert report.records_read[str(messy_dir / "prs.jsonl")] == 4
    assert report.records_kept[str(messy_dir / "prs.jsonl")] == 1
    assert dataset.prs[0].comments[0].is_bot
    assert team_map == {"o/r": "o/r"}


def test_ingest_strict(messy_dir, cal_2024):
    with pytest.raises(SchemaError) as e:
        ingest_files(str(messy_dir), cal_2024, strict=True)
    assert e.value.line == 2


def test_ingest_unreadable(tmp_path, cal_2024):
    with pytest.raises(SchemaError):
        ingest_files(str(tmp_path), cal_2024)

    write_lines(tmp_path / "prs.jsonl", "{not json")
    write_lines(tmp_path / "comments.jsonl")
    write_lines(tmp_path / "commits.jsonl")
    with pytest.raises(SchemaError) as e:
        ingest_files(str(tmp_path), cal_2024)
    assert e.value.line == 1


def test_ingest_invalid_utf8(tmp_path, cal_2024):
    good = json.dumps({"repo_id": "o/r", "number": 1, "created_at": CREATED, "author": "a"})
    (tmp_path / "prs.jsonl").write_bytes(good.encode() + b"\n" + b'{"author": "\xff"}\n')
    write_lines(tmp_path / "comments.jsonl")
    write_lines(tmp_path / "commits.jsonl")
    with pytest.raises(SchemaError) as e:
        ingest_files(str(tmp_path), cal_2024)
    assert e.value.line == 2
    assert "UTF-8" in str(e.value)


def test_writers_raise_output_error(tmp_path, cal_2024):
    blocker = tmp_path / "taken"
    blocker.write_text("")
    dataset = Dataset(cohort=cal_2024, prs=[pr129_record()])
    with pytest.raises(OutputError):
        write_records(dataset, {}, str(blocker))
    with pytest.raises(OutputError):
        write_records(dataset, {}, str(blocker / "below"))


def test_team_map_file(tmp_path, cal_2024, rules):
    dataset = Dataset(cohort=cal_2024, prs=[pr129_record()])
    write_records(dataset, {PR129_REPO: "team-08"}, str(tmp_path))
    _, _, team_map = ingest_files(str(tmp_path), cal_2024, rules)
    assert team_map == {PR129_REPO: "team-08"}

    (tmp_path / "teams.json").write_text('{"o/r": 3}')
    with pytest.raises(SchemaError):
        ingest_files(str(tmp_path), cal_2024, rules)


def test_live_and_file_ingest_agree(tmp_path, cal_2024, rules):
    host = SnapshotHost(pr129_snapshot(), clock=scripted_clock(PR129_COMMENT_TIMES))
    for comment in pr129_record().comments:
        host.post_comment(PR129_REPO, PR129_NUMBER, comment.body)

    live, live_report, live_teams = ingest_host(host, [PR129_REPO], cal_2024, rules)
    write_records(live, live_teams, str(tmp_path))
    stored, stored_report, stored_teams = ingest_files(str(tmp_path), cal_2024, rules)

    assert stored.prs == live.prs
    assert stored_teams == live_teams
    assert stored_report.dropped == live_report.dropped == []
    assert classify_all(stored, rules) == classify_all(live, rules)
    assert classify(live.prs[0], rules).actioned
