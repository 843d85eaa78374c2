"""Timestamp helpers. All stored times are UTC epoch milliseconds."""
from __future__ import annotations

from datetime import date, datetime, time, timedelta, timezone
from functools import lru_cache
from zoneinfo import ZoneInfo

MS_PER_MIN = 60_000
MS_PER_HOUR = 3_600_000
MS_PER_DAY = 86_400_000


@lru_cache(maxsize=64)
def zone(tz: str) -> ZoneInfo:
    return ZoneInfo(tz)


def to_datetime(t_ms: int, tz: str = "UTC") -> datetime:
    return datetime.fromtimestamp(t_ms / 1000.0, tz=timezone.utc).astimezone(zone(tz))


def local_ms(d: date, clock: time | str, tz: str) -> int:
    """UTC epoch ms of a local wall-clock time on date `d`."""
    if isinstance(clock, str):
        clock = parse_clock(clock)
    dt = datetime.combine(d, clock, tzinfo=zone(tz))
    return round(dt.timestamp() * 1000)


def parse_clock(text: str) -> time:
    """'HH:MM' or 'HH:MM:SS' local clock time."""
    parts = [int(p) for p in text.split(":")]
    while len(parts) < 3:
        parts.append(0)
    return time(parts[0], parts[1], parts[2])


def clock_minutes(text: str) -> float:
    c = parse_clock(text)
    return c.hour * 60 + c.minute + c.second / 60


def local_date(t_ms: int, tz: str) -> date:
    return to_datetime(t_ms, tz).date()


def day_bounds(d: date, tz: str) -> tuple[int, int]:
    """[start, end) of local calendar day `d` in UTC ms (DST aware)."""
    return local_ms(d, time(0), tz), local_ms(d + timedelta(days=1), time(0), tz)


def minute_floor(t_ms: int) -> int:
    return t_ms - t_ms % MS_PER_MIN


def minute_key(t_ms: int, tz: str = "UTC") -> str:
    """Compact minute key, e.g. 20190701T11:52."""
    return to_datetime(t_ms, tz).strftime("%Y%m%dT%H:%M")


def day_key(d: date) -> str:
    return d.strftime("%Y%m%d")


def week_key(d: date) -> str:
    iso = d.isocalendar()
    return f"{iso[0]}W{iso[1]:02d}"


def daterange(start: date, end: date):
    """Inclusive range of dates."""
    d = start
    while d <= end:
        yield d
        d += timedelta(days=1)


def parse_date(text: str) -> date:
    return date.fromisoformat(text)
