"""Time windows used to split the corpus into before/during phases."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

# The 2017 canvas opened on 2017-03-31 UTC and froze 72 hours later.
EXPERIMENT_START = datetime(2017, 3, 31, tzinfo=timezone.utc)
EXPERIMENT_HOURS = 72
BEFORE_DAYS = 90

MS = timedelta(milliseconds=1)


@dataclass(frozen=True)
class TimeWindow:
    """Closed interval [start, end] in UTC; empty when start > end."""

    start: datetime
    end: datetime

    def __post_init__(self):
        for bound in (self.start, self.end):
            if bound.tzinfo is None:
                raise ValueError("window bounds must be timezone-aware")

    @property
    def start_ms(self) -> int:
        return int(self.start.timestamp() * 1000)

    @property
    def end_ms(self) -> int:
        return int(self.end.timestamp() * 1000)

    def contains_ms(self, ts_ms) -> bool:
        return self.start_ms <= ts_ms <= self.end_ms

    def contains_s(self, ts_s) -> bool:
        return self.start.timestamp() <= ts_s <= self.end.timestamp()

    def duration_days(self) -> float:
        span = (self.end - self.start).total_seconds()
        return max(span, 0.0) / 86400.0

    def overlaps(self, other: "TimeWindow") -> bool:
        return self.start <= other.end and other.start <= self.end

    @classmethod
    def parse(cls, pair) -> "TimeWindow":
        start, end = (_parse_instant(v) for v in pair)
        return cls(start, end)


def _parse_instant(value) -> datetime:
    if isinstance(value, datetime):
        return value if value.tzinfo else value.replace(tzinfo=timezone.utc)
    if isinstance(value, (int, float)):
        return datetime.fromtimestamp(value, tz=timezone.utc)
    text = str(value).strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    parsed = datetime.fromisoformat(text)
    return parsed if parsed.tzinfo else parsed.replace(tzinfo=timezone.utc)


def default_windows() -> dict[str, TimeWindow]:
    """BP covers the 90 days before the canvas opened, DP the 72 hours of it."""
    start = EXPERIMENT_START
    end = start + timedelta(hours=EXPERIMENT_HOURS)
    return {
        "bp": TimeWindow(start - timedelta(days=BEFORE_DAYS), start - MS),
        "dp": TimeWindow(start, end - MS),
    }
