# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Cohort calendar math.

Instants are mapped to a strict semester grid: week k covers the local days
[week1_monday + 7(k-1), week1_monday + 7k), boundaries at local midnight. Instants
outside the grid map to the OutsideSemester sentinel instead of being clamped.
"""

import logging
import os
from datetime import datetime, time, timedelta
from functools import lru_cache
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

import yaml

from reviewer.core.instants import parse_instant
from reviewer.core.models import CohortCalendar, WeekIndex
from reviewer.literals import ConfigError, Sprint, UnknownTimezoneError

logger = logging.getLogger(__name__)

PRESETS_DIR = os.path.join(
    os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "calendars"
)

SPRINTS = {
    Sprint.DESIGN: range(1, 5),
    Sprint.DEVELOPMENT_I: range(5, 9),
    Sprint.DEVELOPMENT_II: range(9, 13),
    Sprint.HANDOVER: range(13, 15),
}


@lru_cache(maxsize=None)
def resolve_timezone(name: str) -> ZoneInfo:
    """Return the timezone, raising UnknownTimezoneError when it does not exist."""
    try:
        return ZoneInfo(name)
    except (ZoneInfoNotFoundError, ValueError) as e:
        raise UnknownTimezoneError(f"unknown timezone {name!r}") from e


def to_local(instant: datetime, cal: CohortCalendar) -> datetime:
    """Wall-clock time of the instant in the calendar timezone."""
    return parse_instant(instant).astimezone(resolve_timezone(cal.timezone_name))


def week_of(instant: datetime, cal: CohortCalendar) -> WeekIndex:
    """Semester week of the instant, or OutsideSemester."""
    days = (to_local(instant, cal).date() - cal.week1_monday).days
    if 0 <= days < 7 * cal.n_weeks:
        return WeekIndex(value=days // 7 + 1)
    return WeekIndex.outside()


def week_bounds(cal: CohortCalendar, week: int) -> tuple[datetime, datetime]:
    """Local [start, end) of a semester week."""
    if not 1 <= week <= cal.n_weeks:
        raise ValueError(f"week {week} outside 1..{cal.n_weeks}")
    tz = resolve_timezone(cal.timezone_name)
    start = cal.week1_monday + timedelta(days=7 * (week - 1))
    end = start + timedelta(days=7)
    return (
        datetime.combine(start, time.min, tzinfo=tz),
        datetime.combine(end, time.min, tzinfo=tz),
    )


def sprint_of(week: WeekIndex) -> Sprint | None:
    """Agile sprint a week belongs to."""
    for sprint, weeks in SPRINTS.items():
        if week.value in weeks:
            return sprint
    return None


def load_calendar(ref: str) -> CohortCalendar:
    """Load a calendar from a YAML file, or from a shipped preset by label.

    Raises:
        ConfigError: if the file is missing or invalid.
        UnknownTimezoneError: if the timezone is not in the timezone database.
    """
    path = ref if os.path.exists(ref) else os.path.join(PRESETS_DIR, f"{ref}.yaml")
    if not os.path.exists(path):
        raise ConfigError(f"calendar {ref!r} is neither a file nor a preset")
    try:
        with open(path, "r") as f:
            cal = CohortCalendar.parse_obj(yaml.safe_load(f) or {})
    except (yaml.YAMLError, ValueError) as e:
        raise ConfigError(f"invalid calendar {path}: {e}") from e
    resolve_timezone(cal.timezone_name)
    logger.debug(f"Loaded calendar {cal.cohort_label} from {path}")
    return cal
