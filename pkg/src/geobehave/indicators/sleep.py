"""Nightly sleep from minute activity counts.

The night of date ``d`` is the local window 20:00 on ``d`` to 12:00 the
next day. Minutes are "still" when their count is at or below a small
threshold; unrecorded minutes count as still because recording stops when
the device lies motionless. Active bouts shorter than the tolerance are
absorbed, still runs of at least ``min_run_min`` are sleep candidates, and
candidates separated by bouts up to ``max_wake_min`` are joined. The longest
joined episode is the night's sleep; each joined-over bout is one
interruption and its minutes are not counted as sleep.
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from ..ingest.records import SensorStream
from ..timeutil import MS_PER_MIN, local_ms
from .activity import CountParams, MinuteSeries, activity_counts

VERY_LOW_QUALITY = 0.2


@dataclass(frozen=True)
class SleepParams:
    window_start: str = "20:00"
    window_end: str = "12:00"
    still_max_counts: int = 20
    tolerance_min: int = 5  # active bouts shorter than this are ignored
    min_run_min: int = 30
    max_wake_min: int = 60
    min_available_h: float = 4.0


@dataclass
class SleepResult:
    night: date
    sleep_start: int | None
    wake_time: int | None
    interruptions: int
    hours: float
    available_hours: float
    quality_flag: float | None = None  # very-low quality when the window is mostly missing


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """[start, end) index runs where mask is True."""
    if len(mask) == 0:
        return []
    d = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    starts = np.nonzero(d == 1)[0]
    ends = np.nonzero(d == -1)[0]
    return list(zip(starts.tolist(), ends.tolist()))


def night_window(night: date, tz: str, params: SleepParams | None = None) -> tuple[int, int]:
    p = params or SleepParams()
    return local_ms(night, p.window_start, tz), local_ms(night + timedelta(days=1), p.window_end, tz)


def detect_sleep_from_counts(counts: MinuteSeries, night: date, tz: str,
                             params: SleepParams | None = None) -> SleepResult:
    p = params or SleepParams()
    lo, hi = night_window(night, tz, p)
    n = (hi - lo) // MS_PER_MIN
    grid = lo + np.arange(n, dtype=np.int64) * MS_PER_MIN
    recorded = np.zeros(n, dtype=bool)
    c = np.zeros(n, dtype=np.int64)
    sel = (counts.minute >= lo) & (counts.minute < hi)
    idx = (counts.minute[sel] - lo) // MS_PER_MIN
    recorded[idx] = True
    c[idx] = counts.values[sel]
    available_h = recorded.sum() / 60.0

    still = ~recorded | (c <= p.still_max_counts)
    # absorb short movements
    for a, b in _runs(~still):
        if b - a < p.tolerance_min:
            still[a:b] = True
    candidates = [(a, b) for a, b in _runs(still) if b - a >= p.min_run_min]
    episodes: list[tuple[int, int, list[tuple[int, int]]]] = []
    for a, b in candidates:
        if episodes and a - episodes[-1][1] <= p.max_wake_min:
            s, _, wakes = episodes[-1]
            wakes.append((episodes[-1][1], a))
            episodes[-1] = (s, b, wakes)
        else:
            episodes.append((a, b, []))
    flag = VERY_LOW_QUALITY if available_h < p.min_available_h else None
    if not episodes:
        return SleepResult(night, None, None, 0, 0.0, available_h, flag)

    def asleep(e):
        return (e[1] - e[0]) - sum(w1 - w0 for w0, w1 in e[2])

    best = max(episodes, key=lambda e: (asleep(e), -e[0]))
    hours = asleep(best) / 60.0
    return SleepResult(
        night,
        int(grid[best[0]]),
        int(grid[best[1] - 1] + MS_PER_MIN),
        len(best[2]),
        float(hours),
        float(available_h),
        flag,
    )


def detect_sleep(stream: SensorStream, night: date, params: SleepParams | None = None,
                 count_params: CountParams | None = None) -> SleepResult:
    lo, hi = night_window(night, stream.timezone, params)
    blocks = [b for b in stream.blocks() if b.end >= lo and b.start < hi]
    counts = activity_counts(blocks, count_params)
    return detect_sleep_from_counts(counts, night, stream.timezone, params)
