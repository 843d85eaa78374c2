from __future__ import annotations

from datetime import date

import numpy as np

from ..timeutil import MS_PER_MIN, day_bounds, daterange, local_date
from .records import SensorStream


def compute_availability(stream: SensorStream, day: date) -> dict:
    """Recorded hours on a local calendar day.

    Each accelerometer sample covers one nominal sampling interval of its
    segment, so gaps contribute nothing. GPS coverage counts the distinct
    minutes holding at least one fix (nominal cadence one per minute).
    """
    lo, hi = day_bounds(day, stream.timezone)
    accel_s = 0.0
    for seg in stream.accel:
        if len(seg) == 0 or seg.end < lo or seg.start >= hi:
            continue
        n = int(np.count_nonzero((seg.t >= lo) & (seg.t < hi)))
        accel_s += n / seg.rate_hz
    minutes = {g.t // MS_PER_MIN for g in stream.gps if lo <= g.t < hi}
    span_h = (hi - lo) / 3_600_000
    return {
        "accel_hours": min(accel_s / 3600.0, span_h),
        "gps_hours": min(len(minutes) / 60.0, span_h),
    }


def stream_days(stream: SensorStream) -> list[date]:
    """Local dates touched by any record of the stream."""
    ts = []
    for seg in stream.accel:
        if len(seg):
            ts.extend([seg.start, seg.end])
    ts.extend(g.t for g in stream.gps)
    ts.extend(r.t for r in stream.reports)
    if not ts:
        return []
    first, last = local_date(min(ts), stream.timezone), local_date(max(ts), stream.timezone)
    return list(daterange(first, last))
