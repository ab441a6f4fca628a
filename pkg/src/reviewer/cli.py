# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Command line entry point.

Exit codes: 0 on success (guardrail rejections included), 1 on reviewer errors, 2 on
usage errors. Diagnostics go to standard error; data goes to files or standard output.
"""

import argparse
import asyncio
import json
import logging
import os
import sys
import tempfile
from typing import Callable, Iterator, Optional

import shortuuid
import uvicorn
from pydantic import BaseModel, ValidationError, validator

from reviewer.core.calendar import load_calendar, week_of
from reviewer.core.config import ServiceConfig, load_config
from reviewer.core.instants import format_instant
from reviewer.core.models import ClassificationConfig, TriggerEvent
from reviewer.events.webhook import build_app
from reviewer.fixtures import (
    PR129_COMMENT_TIMES,
    PR129_NUMBER,
    PR129_REPO,
    PROFILES,
    cohort_dataset,
    pr129_snapshot,
    scripted_clock,
)
from reviewer.literals import (
    VALID_LOG_LEVELS,
    EngagementStatus,
    ProviderKind,
    ReviewerError,
    Subcommand,
)
from reviewer.managers.host import CodeHost, DryRunHost, SnapshotHost, build_host
from reviewer.managers.provider import build_provider
from reviewer.managers.report import build_bundle, emit
from reviewer.managers.runner import ReviewRunner, ledger_for
from reviewer.managers.telemetry import (
    classify,
    classify_all,
    ingest_files,
    ingest_host,
    summarize,
    write_classified,
    write_ingest_report,
    write_records,
    writing_to,
)

logger = logging.getLogger(__name__)

CLASSIFIED_FILE = "classified.jsonl"
SUMMARY_JSON = "summary.json"
INGEST_REPORT_FILE = "ingest_report.json"


class CommandSpec(BaseModel):
    """Parsed command line."""

    subcommand: Subcommand
    log_level: str = "info"
    config: Optional[str] = None
    data: list[str] = []
    calendar: list[str] = []
    out: Optional[str] = None
    dry_run: bool = False
    snapshot: Optional[str] = None
    repo: list[str] = []
    pr: Optional[int] = None
    bot_logins: Optional[str] = None
    success_header: Optional[str] = None
    strict_teams: bool = False
    strict: bool = False

    @validator("log_level")
    @classmethod
    def known_level(cls, value: str) -> str:
        """One of the logging levels."""
        if value.lower() not in VALID_LOG_LEVELS:
            raise ValueError(f"log level must be one of {VALID_LOG_LEVELS}")
        return value.lower()

    def classification(self, config: ServiceConfig) -> ClassificationConfig:
        """Classification rules from the configuration, overridden by the flags."""
        rules = config.bot.classification(self.strict_teams)
        overrides = {}
        if self.bot_logins:
            overrides["bot_logins"] = [b.strip() for b in self.bot_logins.split(",") if b.strip()]
        if self.success_header:
            overrides["success_header"] = self.success_header
        return ClassificationConfig(**(rules.dict() | overrides))


def _classification_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--bot-logins", help="comma-separated bot logins")
    parser.add_argument("--success-header", help="header of a successful review comment")
    parser.add_argument(
        "--strict-teams",
        action="store_true",
        help="count a team as using the tool only after a successful review",
    )


def build_parser() -> argparse.ArgumentParser:
    """Parser of every subcommand."""
    parser = argparse.ArgumentParser(
        prog="llm-reviewer", description="LLM code review bot and engagement telemetry."
    )
    parser.add_argument("--log-level", default="info", choices=VALID_LOG_LEVELS)
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    serve = subparsers.add_parser(Subcommand.SERVE.value, help="run the webhook service")
    serve.add_argument("--config", help="service configuration file")

    review = subparsers.add_parser(Subcommand.REVIEW.value, help="review one pull request")
    review.add_argument("--config", help="service configuration file")
    review.add_argument("--repo", action="append", required=True, help="owner/name")
    review.add_argument("--pr", type=int, required=True, help="pull request number")
    review.add_argument("--dry-run", action="store_true", help="print comments, do not post")
    review.add_argument("--snapshot", help="read the pull request from a JSON snapshot")

    ingest = subparsers.add_parser(Subcommand.INGEST.value, help="normalize input records")
    ingest.add_argument("--config", help="service configuration file")
    source = ingest.add_mutually_exclusive_group(required=True)
    source.add_argument("--data", action="append", help="directory of record files")
    source.add_argument("--repo", action="append", help="query the code host for owner/name")
    ingest.add_argument("--calendar", action="append", required=True)
    ingest.add_argument("--out", required=True, help="output directory")
    ingest.add_argument("--strict", action="store_true", help="fail on the first invalid record")
    _classification_flags(ingest)

    analyze = subparsers.add_parser(Subcommand.ANALYZE.value, help="classify pull requests")
    analyze.add_argument("--config", help="service configuration file")
    analyze.add_argument("--data", action="append", required=True)
    analyze.add_argument("--calendar", action="append", required=True)
    analyze.add_argument("--out", required=True, help="output directory")
    _classification_flags(analyze)

    report = subparsers.add_parser(Subcommand.REPORT.value, help="write the report tables")
    report.add_argument("--config", help="service configuration file")
    report.add_argument("--data", action="append", required=True, help="repeat per cohort")
    report.add_argument("--calendar", action="append", required=True, help="repeat per cohort")
    report.add_argument("--out", required=True, help="output directory")
    _classification_flags(report)

    demo = subparsers.add_parser(Subcommand.DEMO.value, help="run the offline demo")
    demo.add_argument("--out", help="output directory, a temporary one by default")
    return parser


def _single(spec: CommandSpec, field: str) -> str:
    values = getattr(spec, field)
    if len(values) != 1:
        raise ReviewerError(f"{spec.subcommand.value} takes exactly one --{field}")
    return values[0]


def _pairs(spec: CommandSpec) -> list[tuple[str, str]]:
    if len(spec.data) != len(spec.calendar):
        raise ReviewerError("--data and --calendar must be given the same number of times")
    return list(zip(spec.data, spec.calendar))


def cmd_serve(spec: CommandSpec) -> int:
    """Run the webhook service until interrupted."""
    config = load_config(spec.config)
    runner = ReviewRunner(
        config,
        build_host(config.host, config.bot.bot_login),
        build_provider(config.provider),
        ledger_for(config),
    )
    secret = config.service.webhook_secret()
    if not secret:
        logger.warning("No webhook secret configured: signatures are not verified")
    uvicorn.run(
        build_app(runner, secret),
        host=config.service.host,
        port=config.service.port,
        log_level=spec.log_level,
    )
    return 0


def cmd_review(spec: CommandSpec) -> int:
    """Review one pull request now."""
    config = load_config(spec.config)
    repo_id = _single(spec, "repo")
    host: CodeHost
    if spec.snapshot:
        host = SnapshotHost.from_file(spec.snapshot, bot_login=config.bot.bot_login)
    else:
        host = build_host(config.host, config.bot.bot_login)
    if spec.dry_run:
        host = DryRunHost(host)

    info = host.pull_request(repo_id, spec.pr)
    event = TriggerEvent(
        repo_id=repo_id,
        pr_number=spec.pr,
        head_sha=info.head_sha,
        delivery_id=f"cli-{shortuuid.uuid()}",
    )
    runner = ReviewRunner(config, host, build_provider(config.provider), ledger_for(config))
    results = asyncio.run(runner.handle_trigger(event))
    for result in results:
        logger.info(
            f"{result.file_path}: {result.outcome.value}"
            + (f" ({result.failure_rule})" if result.failure_rule else "")
        )
    return 0


def _ingest_all(spec: CommandSpec, rules: ClassificationConfig, strict: bool) -> Iterator[tuple]:
    for data_dir, cal_ref in _pairs(spec):
        cal = load_calendar(cal_ref)
        dataset, report, team_map = ingest_files(data_dir, cal, rules, strict)
        yield cal, dataset, report, team_map


def cmd_ingest(spec: CommandSpec) -> int:
    """Validate and normalize input records."""
    config = load_config(spec.config)
    rules = spec.classification(config)
    if spec.repo:
        cal = load_calendar(_single(spec, "calendar"))
        host = build_host(config.host, config.bot.bot_login)
        dataset, report, team_map = ingest_host(host, spec.repo, cal, rules, spec.strict)
        batches = [(cal, dataset, report, team_map)]
    else:
        batches = list(_ingest_all(spec, rules, spec.strict))

    for cal, dataset, report, team_map in batches:
        out_dir = spec.out if len(batches) == 1 else os.path.join(spec.out, cal.cohort_label)
        write_records(dataset, team_map, out_dir)
        write_ingest_report(report, os.path.join(out_dir, INGEST_REPORT_FILE))
        logger.info(
            f"{cal.cohort_label}: kept {len(dataset.prs)} pull requests, "
            f"dropped {report.dropped_total} records"
        )
    return 0


def cmd_analyze(spec: CommandSpec) -> int:
    """Classify pull requests and write the classified records."""
    config = load_config(spec.config)
    rules = spec.classification(config)
    batches = list(_ingest_all(spec, rules, False))
    for cal, dataset, report, team_map in batches:
        out_dir = spec.out if len(batches) == 1 else os.path.join(spec.out, cal.cohort_label)
        classified = classify_all(dataset, rules)
        summary = summarize(classified, team_map, rules, cal)
        with writing_to(out_dir):
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, SUMMARY_JSON), "w", encoding="utf-8") as f:
                f.write(summary.json(indent=2, sort_keys=True))
        write_classified(classified, cal, os.path.join(out_dir, CLASSIFIED_FILE))
        write_ingest_report(report, os.path.join(out_dir, INGEST_REPORT_FILE))
        sys.stdout.write(summary.json(sort_keys=True) + "\n")
    return 0


def cmd_report(spec: CommandSpec) -> int:
    """Write the report tables of one or more cohorts."""
    config = load_config(spec.config)
    rules = spec.classification(config)
    cohorts = [
        (classify_all(dataset, rules), team_map, cal)
        for cal, dataset, _, team_map in _ingest_all(spec, rules, False)
    ]
    for path in emit(build_bundle(cohorts, rules), spec.out):
        sys.stdout.write(f"{path}\n")
    return 0


def run_demo(out_dir: str) -> dict:
    """Bot and telemetry on the shipped fixtures, without network or credentials.

    Raises:
        ReviewerError: if the golden trace does not come out actioned.
    """
    config = ServiceConfig.parse_obj({"provider": {"kind": ProviderKind.MOCK.value}})
    host = SnapshotHost(
        pr129_snapshot(),
        bot_login=config.bot.bot_login,
        clock=scripted_clock(PR129_COMMENT_TIMES),
    )
    runner = ReviewRunner(config, host, build_provider(config.provider))
    info = host.pull_request(PR129_REPO, PR129_NUMBER)
    event = TriggerEvent(
        repo_id=PR129_REPO, pr_number=PR129_NUMBER, head_sha=info.head_sha, delivery_id="demo-129"
    )
    results = asyncio.run(runner.handle_trigger(event))

    cal = load_calendar("2024")
    rules = config.bot.classification()
    dataset, _, _ = ingest_host(host, [PR129_REPO], cal, rules)
    verdict = classify(dataset.prs[0], rules)
    if verdict.status != EngagementStatus.SUCCESSFUL or not verdict.actioned:
        raise ReviewerError(f"PR #{PR129_NUMBER} was not classified as an actioned review")

    cohorts = []
    for label in PROFILES:
        data_dir = os.path.join(out_dir, "data", label)
        dataset, team_map = cohort_dataset(label)
        write_records(dataset, team_map, data_dir)
        dataset, _, team_map = ingest_files(data_dir, dataset.cohort, rules)
        cohorts.append((classify_all(dataset, rules), team_map, dataset.cohort))
    written = emit(build_bundle(cohorts, rules), os.path.join(out_dir, "report"))

    return {
        "pr": f"{PR129_REPO}#{PR129_NUMBER}",
        "comments_posted": len(results),
        "status": verdict.status.value,
        "first_success_at": format_instant(verdict.first_success_at),
        "actioned": verdict.actioned,
        "week": str(week_of(verdict.pr.created_at, cal)),
        "report_files": written,
    }


def cmd_demo(spec: CommandSpec) -> int:
    """Run the demo and print the verdict."""
    out_dir = spec.out or tempfile.mkdtemp(prefix="llm-reviewer-demo-")
    sys.stdout.write(json.dumps(run_demo(out_dir), indent=2) + "\n")
    return 0


COMMANDS: dict[Subcommand, Callable[[CommandSpec], int]] = {
    Subcommand.SERVE: cmd_serve,
    Subcommand.REVIEW: cmd_review,
    Subcommand.INGEST: cmd_ingest,
    Subcommand.ANALYZE: cmd_analyze,
    Subcommand.REPORT: cmd_report,
    Subcommand.DEMO: cmd_demo,
}


def run(argv: list[str] | None = None) -> int:
    """Parse the arguments, run the subcommand and return the exit code."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    spec = CommandSpec.parse_obj({k: v for k, v in vars(args).items() if v is not None})
    logging.basicConfig(
        level=spec.log_level.upper(),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[spec.subcommand](spec)
    except (ReviewerError, ValidationError) as e:
        logger.error(str(e))
        return 1


def main() -> int:
    """Console script entry point."""
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
