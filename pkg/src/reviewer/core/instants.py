# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Timestamp normalization.

Every instant handled by the reviewer is a timezone-aware datetime in UTC. The code
host emits ISO-8601 strings such as ``2024-05-14T07:08:35Z``; naive values are
assumed to already be in UTC.
"""

from datetime import datetime, timezone

WIRE_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


def parse_instant(value: str | datetime) -> datetime:
    """Parse a wire timestamp into a UTC-aware datetime.

    Raises:
        ValueError: if the value cannot be parsed.
    """
    if isinstance(value, datetime):
        parsed = value
    elif isinstance(value, str) and value.strip():
        text = value.strip()
        if text[-1] in ("Z", "z"):
            text = text[:-1] + "+00:00"
        parsed = datetime.fromisoformat(text)
    else:
        raise ValueError(f"not a timestamp: {value!r}")

    if parsed.tzinfo is None:
        return parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)


def format_instant(value: datetime) -> str:
    """Render an instant in the wire format, second precision."""
    return parse_instant(value).strftime(WIRE_FORMAT)
