#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

from bisect import bisect_right
from datetime import date, datetime, timedelta, timezone

import pandas as pd
import pytest
from parameterized import parameterized
from pydantic import ValidationError

from reviewer.core.calendar import load_calendar, sprint_of, week_bounds, week_of
from reviewer.core.models import CohortCalendar, WeekIndex
from reviewer.literals import ConfigError, Sprint, UnknownTimezoneError

# First Monday of every week of the semester, plus the Monday after week 14
MONDAYS = {
    "2023": [d.date() for d in pd.date_range("2023-03-27", periods=15, freq="7D")],
    "2024": [d.date() for d in pd.date_range("2024-03-25", periods=15, freq="7D")],
}


def expected_week(label: str, instant: datetime) -> int | None:
    local_day = pd.Timestamp(instant).tz_convert("Australia/Melbourne").date()
    mondays = MONDAYS[label]
    if not mondays[0] <= local_day < mondays[-1]:
        return None
    return bisect_right(mondays, local_day)


@parameterized.expand([("2023",), ("2024",)])
def test_hourly_sweep_matches_monday_table(label):
    cal = load_calendar(label)
    midnight = datetime.min.time()
    start = datetime.combine(MONDAYS[label][0] - timedelta(days=2), midnight, timezone.utc)
    end = datetime.combine(MONDAYS[label][-1] + timedelta(days=2), midnight, timezone.utc)
    instant = start
    while instant < end:
        assert week_of(instant, cal).value == expected_week(label, instant), instant
        instant += timedelta(hours=1)


@parameterized.expand(
    [
        ("2024", "2024-03-24T12:59:59Z", None),
        ("2024", "2024-03-24T13:00:00Z", 1),
        ("2024", "2024-03-31T12:59:59Z", 1),
        ("2024", "2024-03-31T13:00:00Z", 2),
        # Daylight saving ended on 7 April: midnight is now UTC+10
        ("2024", "2024-04-07T13:59:59Z", 2),
        ("2024", "2024-04-07T14:00:00Z", 3),
        ("2024", "2024-06-30T13:59:59Z", 14),
        ("2024", "2024-06-30T14:00:00Z", None),
        ("2023", "2023-03-26T12:59:59Z", None),
        ("2023", "2023-03-26T13:00:00Z", 1),
        ("2023", "2023-07-02T13:59:59Z", 14),
        ("2023", "2023-07-02T14:00:00Z", None),
    ]
)
def test_week_boundaries(label, instant, week):
    assert week_of(instant, load_calendar(label)).value == week


def test_outside_is_not_clamped(cal_2024):
    assert week_of("2023-12-01T00:00:00Z", cal_2024) == WeekIndex.outside()
    assert week_of("2025-01-01T00:00:00Z", cal_2024).is_outside


def test_week_bounds(cal_2024):
    start, end = week_bounds(cal_2024, 8)
    assert start.date() == date(2024, 5, 13)
    assert end - start == timedelta(days=7)
    assert week_of(start, cal_2024).value == 8
    assert week_of(end - timedelta(seconds=1), cal_2024).value == 8
    with pytest.raises(ValueError):
        week_bounds(cal_2024, 15)


@parameterized.expand(
    [
        (1, Sprint.DESIGN),
        (4, Sprint.DESIGN),
        (5, Sprint.DEVELOPMENT_I),
        (8, Sprint.DEVELOPMENT_I),
        (9, Sprint.DEVELOPMENT_II),
        (12, Sprint.DEVELOPMENT_II),
        (13, Sprint.HANDOVER),
        (14, Sprint.HANDOVER),
        (None, None),
    ]
)
def test_sprint_of(week, sprint):
    assert sprint_of(WeekIndex(value=week)) == sprint


def test_non_monday_rejected():
    with pytest.raises(ValidationError):
        CohortCalendar(cohort_label="x", week1_monday=date(2024, 3, 26))


def test_unknown_timezone():
    cal = CohortCalendar(
        cohort_label="x", week1_monday=date(2024, 3, 25), timezone_name="Mars/Olympus_Mons"
    )
    with pytest.raises(UnknownTimezoneError):
        week_of("2024-04-01T00:00:00Z", cal)


def test_load_calendar_from_file(tmp_path):
    path = tmp_path / "cohort.yaml"
    path.write_text("cohort_label: pilot\nweek1_monday: 2025-03-03\nn_weeks: 2\n")
    cal = load_calendar(str(path))
    assert cal.cohort_label == "pilot"
    assert cal.timezone_name == "Australia/Melbourne"
    assert week_of("2025-03-17T00:00:00Z", cal).is_outside


def test_load_calendar_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_calendar("1999")
    path = tmp_path / "bad.yaml"
    path.write_text("cohort_label: bad\nweek1_monday: 2025-03-04\n")
    with pytest.raises(ConfigError):
        load_calendar(str(path))
