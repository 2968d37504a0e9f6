"""UTC instant helpers.

Internally instants are integer milliseconds since the Unix epoch; the public
types expose timezone-aware ``datetime`` objects.
"""

from __future__ import annotations

import re
from datetime import datetime, timedelta, timezone

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
_NUMERIC = re.compile(r"^-?\d+(\.\d+)?$")


def to_ms(t: datetime) -> int:
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    delta = t - _EPOCH
    return (delta.days * 86_400 + delta.seconds) * 1000 + delta.microseconds // 1000


def from_ms(ms: int) -> datetime:
    return _EPOCH + timedelta(milliseconds=ms)


def parse_instant(text: str) -> datetime:
    """Parse epoch milliseconds or ISO-8601 text into an aware UTC datetime.

    Naive ISO timestamps are taken to be UTC.
    """
    s = text.strip()
    if not s:
        raise ValueError("empty timestamp")
    if _NUMERIC.match(s):
        return from_ms(int(round(float(s))))
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    t = datetime.fromisoformat(s)
    if t.tzinfo is None:
        return t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


def format_instant(t: datetime) -> str:
    """ISO-8601 UTC with millisecond precision and a ``Z`` suffix."""
    t = t.astimezone(timezone.utc)
    return t.strftime("%Y-%m-%dT%H:%M:%S.") + f"{t.microsecond // 1000:03d}Z"


def floor_to(ms: int, step_ms: int, origin_ms: int = 0) -> int:
    return origin_ms + ((ms - origin_ms) // step_ms) * step_ms


def ceil_to(ms: int, step_ms: int, origin_ms: int = 0) -> int:
    return origin_ms - ((origin_ms - ms) // step_ms) * step_ms
