# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Report tables.

Column schemas of the written files:

* ``summary.tsv``: cohort, teams_total, teams_using_ai, prs_total, prs_success,
  prs_failed, prs_none, prs_actioned, prs_outside_semester, action_rate,
  action_rate_pct, commits_total, comments_total, bot_comments_total
* ``composition_<cohort>.tsv``: week, sprint, n_success, n_failed, n_none, n_total
* ``action_rate_<cohort>.tsv``: week, sprint, action_rate, action_rate_pct, n_success,
  n_actioned; n_success is the point weight
* ``comparison.tsv`` (two cohorts or more): cohort_a, cohort_b, metric, a, b,
  absolute, ratio
* ``digest.md``: human-readable digest

Rates are fractions with four decimals, percentages have one decimal. Undefined
rates are empty fields.
"""

import logging
import os
import re
from typing import Optional

import pandas as pd
from jinja2 import Environment, FileSystemLoader

from reviewer.core.calendar import sprint_of
from reviewer.core.models import (
    ClassificationConfig,
    ClassifiedPR,
    CohortCalendar,
    CohortComparison,
    CohortReport,
    CohortSummary,
    MetricDelta,
    ReportBundle,
)
from reviewer.literals import SchemaError
from reviewer.managers.prompt import TEMPLATES_DIR
from reviewer.managers.telemetry import summarize, weekly_metrics, writing_to

logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.tsv"
COMPARISON_FILE = "comparison.tsv"
DIGEST_FILE = "digest.md"
DIGEST_TEMPLATE = "digest.md.j2"

SUMMARY_COLUMNS = [
    "cohort",
    "teams_total",
    "teams_using_ai",
    "prs_total",
    "prs_success",
    "prs_failed",
    "prs_none",
    "prs_actioned",
    "prs_outside_semester",
    "action_rate",
    "action_rate_pct",
    "commits_total",
    "comments_total",
    "bot_comments_total",
]
COUNT_COLUMNS = [
    c for c in SUMMARY_COLUMNS if c not in ("cohort", "action_rate", "action_rate_pct")
]
COMPOSITION_COLUMNS = ["week", "sprint", "n_success", "n_failed", "n_none", "n_total"]
ACTION_RATE_COLUMNS = [
    "week",
    "sprint",
    "action_rate",
    "action_rate_pct",
    "n_success",
    "n_actioned",
]
COMPARISON_COLUMNS = ["cohort_a", "cohort_b", "metric", "a", "b", "absolute", "ratio"]
COMPARED_METRICS = [
    "teams_total",
    "teams_using_ai",
    "prs_total",
    "prs_success",
    "prs_failed",
    "prs_none",
    "prs_actioned",
    "action_rate_overall",
    "commits_total",
    "comments_total",
]


def format_rate(rate: Optional[float]) -> str:
    """Fraction with four decimals, empty when undefined."""
    return "" if rate is None else f"{rate:.4f}"


def format_pct(rate: Optional[float]) -> str:
    """Percentage with one decimal, empty when undefined."""
    return "" if rate is None else f"{100 * rate:.1f}"


def _number(value: Optional[float]) -> str:
    if value is None:
        return ""
    if float(value).is_integer():
        return str(int(value))
    return f"{value:.4f}"


def cohort_slug(label: str) -> str:
    """File-name friendly cohort label."""
    return re.sub(r"[^A-Za-z0-9._-]+", "_", label) or "cohort"


def build_cohort_report(
    classified: list[ClassifiedPR],
    team_map: dict[str, str],
    cal: CohortCalendar,
    rules: ClassificationConfig | None = None,
) -> CohortReport:
    """Summary and weekly series of one cohort."""
    rows = weekly_metrics(classified, cal)
    outside = [w for w in rows if w.week.is_outside]
    return CohortReport(
        cohort_label=cal.cohort_label,
        summary=summarize(classified, team_map, rules, cal),
        weekly=[w for w in rows if not w.week.is_outside],
        outside=outside[0] if outside else None,
    )


def build_bundle(
    cohorts: list[tuple[list[ClassifiedPR], dict[str, str], CohortCalendar]],
    rules: ClassificationConfig | None = None,
) -> ReportBundle:
    """Reports of every cohort, in the given order."""
    return ReportBundle(
        cohorts=[build_cohort_report(c, teams, cal, rules) for c, teams, cal in cohorts]
    )


def compare_cohorts(a: CohortReport, b: CohortReport) -> CohortComparison:
    """Absolute and ratio deltas from cohort a to cohort b.

    Weeks where a had failed attempts and b has none are listed as zeroed.
    """
    rows = []
    for metric in COMPARED_METRICS:
        value_a = getattr(a.summary, metric)
        value_b = getattr(b.summary, metric)
        defined = value_a is not None and value_b is not None
        rows.append(
            MetricDelta(
                metric=metric,
                a=value_a,
                b=value_b,
                absolute=value_b - value_a if defined else None,
                ratio=value_b / value_a if defined and value_a else None,
            )
        )
    return CohortComparison(
        label_a=a.cohort_label,
        label_b=b.cohort_label,
        rows=rows,
        zero_friction=a.summary.prs_failed > 0 and b.summary.prs_failed == 0,
        weeks_failures_zeroed=[
            wa.week.value
            for wa, wb in zip(a.weekly, b.weekly)
            if wa.n_failed > 0 and wb.n_failed == 0
        ],
    )


def _write_tsv(rows: list[dict], columns: list[str], path: str) -> None:
    frame = pd.DataFrame(rows, columns=columns, dtype=object)
    frame.to_csv(path, sep="\t", index=False, lineterminator="\n", na_rep="")


def _summary_row(report: CohortReport) -> dict:
    summary = report.summary
    row = {c: getattr(summary, c) for c in COUNT_COLUMNS}
    row["cohort"] = report.cohort_label
    row["action_rate"] = format_rate(summary.action_rate_overall)
    row["action_rate_pct"] = format_pct(summary.action_rate_overall)
    return row


def _sprint(week) -> str:
    sprint = sprint_of(week)
    return sprint.value if sprint else ""


@writing_to("report")
def emit(bundle: ReportBundle, out_dir: str) -> list[str]:
    """Write every report file and return their paths, in write order.

    The output only depends on the bundle: emitting twice gives identical bytes.

    Raises:
        OutputError: if a report file cannot be written.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    path = os.path.join(out_dir, SUMMARY_FILE)
    _write_tsv([_summary_row(r) for r in bundle.cohorts], SUMMARY_COLUMNS, path)
    written.append(path)

    for report in bundle.cohorts:
        slug = cohort_slug(report.cohort_label)
        path = os.path.join(out_dir, f"composition_{slug}.tsv")
        _write_tsv(
            [
                {
                    "week": w.week.value,
                    "sprint": _sprint(w.week),
                    "n_success": w.n_success,
                    "n_failed": w.n_failed,
                    "n_none": w.n_none,
                    "n_total": w.n_total,
                }
                for w in report.weekly
            ],
            COMPOSITION_COLUMNS,
            path,
        )
        written.append(path)

        path = os.path.join(out_dir, f"action_rate_{slug}.tsv")
        _write_tsv(
            [
                {
                    "week": w.week.value,
                    "sprint": _sprint(w.week),
                    "action_rate": format_rate(w.action_rate),
                    "action_rate_pct": format_pct(w.action_rate),
                    "n_success": w.n_success,
                    "n_actioned": w.n_actioned,
                }
                for w in report.weekly
            ],
            ACTION_RATE_COLUMNS,
            path,
        )
        written.append(path)

    comparisons = [
        compare_cohorts(a, b) for a, b in zip(bundle.cohorts, bundle.cohorts[1:])
    ]
    if comparisons:
        path = os.path.join(out_dir, COMPARISON_FILE)
        _write_tsv(
            [
                {
                    "cohort_a": c.label_a,
                    "cohort_b": c.label_b,
                    "metric": d.metric,
                    "a": _number(d.a),
                    "b": _number(d.b),
                    "absolute": _number(d.absolute),
                    "ratio": "" if d.ratio is None else f"{d.ratio:.4f}",
                }
                for c in comparisons
                for d in c.rows
            ],
            COMPARISON_COLUMNS,
            path,
        )
        written.append(path)

    path = os.path.join(out_dir, DIGEST_FILE)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(render_digest(bundle, comparisons))
    written.append(path)

    logger.info(f"Wrote {len(written)} report files to {out_dir}")
    return written


def sprint_totals(report: CohortReport) -> list[dict]:
    """Composition counts summed per sprint."""
    totals: dict[str, dict] = {}
    for w in report.weekly:
        sprint = _sprint(w.week) or "unassigned"
        row = totals.setdefault(
            sprint, {"sprint": sprint, "n_success": 0, "n_failed": 0, "n_none": 0, "n_actioned": 0}
        )
        row["n_success"] += w.n_success
        row["n_failed"] += w.n_failed
        row["n_none"] += w.n_none
        row["n_actioned"] += w.n_actioned
    for row in totals.values():
        row["action_rate_pct"] = format_pct(
            row["n_actioned"] / row["n_success"] if row["n_success"] else None
        )
    return list(totals.values())


def render_digest(bundle: ReportBundle, comparisons: list[CohortComparison]) -> str:
    """Markdown digest of the bundle."""
    template = Environment(
        loader=FileSystemLoader(TEMPLATES_DIR), autoescape=False, keep_trailing_newline=True
    ).get_template(DIGEST_TEMPLATE)
    return template.render(
        cohorts=[
            {
                "label": r.cohort_label,
                "summary": _summary_row(r),
                "sprints": sprint_totals(r),
                "outside": r.outside,
            }
            for r in bundle.cohorts
        ],
        comparisons=[
            {
                "label_a": c.label_a,
                "label_b": c.label_b,
                "zero_friction": c.zero_friction,
                "weeks_failures_zeroed": c.weeks_failures_zeroed,
                "rows": [
                    {
                        "metric": d.metric,
                        "a": _number(d.a),
                        "b": _number(d.b),
                        "absolute": _number(d.absolute),
                        "ratio": "" if d.ratio is None else f"{d.ratio:.2f}",
                    }
                    for d in c.rows
                ],
            }
            for c in comparisons
        ],
    )


def parse_summary(path: str) -> list[CohortSummary]:
    """Read a summary file back.

    Raises:
        SchemaError: if the columns do not match.
    """
    frame = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False)
    if list(frame.columns) != SUMMARY_COLUMNS:
        raise SchemaError(f"unexpected columns {list(frame.columns)}", path=path)
    return [
        CohortSummary(cohort_label=row["cohort"], **{c: int(row[c]) for c in COUNT_COLUMNS})
        for row in frame.to_dict(orient="records")
    ]
