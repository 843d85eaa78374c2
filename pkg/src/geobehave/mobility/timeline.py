"""Stop/move timelines from GPS fixes, split into local calendar days."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import timedelta

import numpy as np

from ..calendar import SchoolCalendar
from ..timeutil import MS_PER_MIN, day_bounds, local_date
from .poi import Home, PoiIndex, assign_poi_type
from .stops import StopParams, _scalar_dist, detect_stop_indices
from .transport import TransportParams, classify_transport
from .types import MoveEvent, StopEvent, Timeline

MVPA = 2  # intensity index of "moderate"


@dataclass(frozen=True)
class SegmentationParams:
    stops: StopParams = field(default_factory=StopParams)
    transport: TransportParams = field(default_factory=TransportParams)
    match_radius_m: float = 75.0
    split_gap_ms: int = 30 * MS_PER_MIN


def _path_length(points) -> float:
    return sum(_scalar_dist(a[0], a[1], b[0], b[1]) for a, b in zip(points, points[1:]))


def segment_events(t, lat, lon, pois: PoiIndex | None = None, home: Home | None = None,
                   params: SegmentationParams | None = None) -> list:
    """Alternating stop/move events for a whole trajectory.

    Fixes before the first stop and after the last one are dropped. A move
    holding a recording gap longer than ``split_gap_ms`` is split at the gap
    and an `unknown` placeholder stop covers the gap, provided both halves
    keep at least two fixes; otherwise the gap is bridged.
    """
    p = params or SegmentationParams()
    t = np.asarray(t, dtype=np.int64)
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    spans = detect_stop_indices(t, lat, lon, p.stops)
    events: list = []
    prev_stop = None
    prev_span = None
    for a, b in spans:
        stop = StopEvent(int(t[a]), max(int(t[b]), int(t[a]) + 1),
                         float(lat[a:b + 1].mean()), float(lon[a:b + 1].mean()), n_fixes=b - a + 1)
        stop.poi_type = assign_poi_type(stop, pois, home, p.match_radius_m)
        if prev_stop is not None:
            events.extend(_moves_between(prev_stop, stop, prev_span[1], a, t, lat, lon, p))
        events.append(stop)
        prev_stop, prev_span = stop, (a, b)
    return events


def _moves_between(origin: StopEvent, dest: StopEvent, u: int, v: int, t, lat, lon, p):
    pieces = []
    start = u
    for k in range(u + 1, v - 1):
        if t[k + 1] - t[k] > p.split_gap_ms and k > start:
            pieces.append((start, k))
            start = k + 1
    pieces.append((start, v))
    out = []
    cur = origin
    for n, (a, b) in enumerate(pieces):
        if n < len(pieces) - 1:
            nxt_lat = (lat[b] + lat[b + 1]) / 2
            nxt_lon = (lon[b] + lon[b + 1]) / 2
            nxt = StopEvent(int(t[b]), int(t[b + 1]), float(nxt_lat), float(nxt_lon), "unknown",
                            n_fixes=0, gap=True)
        else:
            nxt = dest
        pts = [(cur.lat, cur.lon)] + list(zip(lat[a:b + 1].tolist(), lon[a:b + 1].tolist())) + [(nxt.lat, nxt.lon)]
        mode, q = classify_transport(t[a:b + 1], lat[a:b + 1], lon[a:b + 1], p.transport)
        out.append(MoveEvent(int(t[a]), int(t[b]), cur.poi_type, nxt.poi_type, _path_length(pts), mode,
                             n_fixes=b - a + 1, mode_quality=q))
        if nxt is not dest:
            out.append(nxt)
        cur = nxt
    return out


@dataclass
class MinuteData:
    """Per-minute base indicators used to annotate events."""

    minute: np.ndarray
    counts: np.ndarray
    steps: np.ndarray
    intensity: np.ndarray

    @classmethod
    def empty(cls) -> "MinuteData":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z, z, z)

    def window(self, start: int, end: int) -> dict:
        lo = np.searchsorted(self.minute, start)
        hi = np.searchsorted(self.minute, end)
        if hi <= lo:
            return {"recorded_minutes": 0, "steps": 0, "mvpa_minutes": 0, "sedentary_minutes": 0}
        return {
            "recorded_minutes": int(hi - lo),
            "steps": int(self.steps[lo:hi].sum()),
            "mvpa_minutes": int(np.count_nonzero(self.intensity[lo:hi] >= MVPA)),
            "sedentary_minutes": int(np.count_nonzero(self.intensity[lo:hi] == 0)),
        }


def attach_indicators(events, minutes: MinuteData | None, reports=()) -> None:
    """Annotate events in place with activity summaries and meal reports."""
    meals = [r for r in reports if r.kind == "meal"]
    mt = np.array([r.t for r in meals], dtype=np.int64)
    for e in events:
        ind = minutes.window(e.start, e.end) if minutes is not None else {}
        if isinstance(e, StopEvent):
            lo = np.searchsorted(mt, e.start)
            hi = np.searchsorted(mt, e.end)
            inside = meals[lo:hi]
            ind["meals"] = len(inside)
            ind["fast_food_meals"] = sum(1 for r in inside if r.food_category == "fast_food")
        e.indicators = ind


def _clip(stop: StopEvent, lo: int, hi: int) -> StopEvent:
    return replace(stop, start=max(stop.start, lo), end=min(stop.end, hi), indicators={})


def split_days(events, participant: str, tz: str, calendar: SchoolCalendar | None = None,
               first_day=None, last_day=None) -> list[Timeline]:
    """Cut a trajectory's events into per-day timelines.

    Every event belongs to the day it starts on. A day whose first event is
    a move is prefixed with the (clipped) stop that move leaves from, so a
    stop running across midnight appears in each day it covers.
    """
    if not events:
        return []
    cal = calendar or SchoolCalendar()
    starts = np.array([e.start for e in events], dtype=np.int64)
    d = first_day or local_date(events[0].start, tz)
    d1 = last_day or local_date(events[-1].end - 1, tz)
    out = []
    while d <= d1:
        lo, hi = day_bounds(d, tz)
        a = int(np.searchsorted(starts, lo))
        b = int(np.searchsorted(starts, hi))
        day = []
        if a > 0 and isinstance(events[a - 1], StopEvent) and events[a - 1].end > lo:
            day.append(_clip(events[a - 1], lo, hi))
        for e in events[a:b]:
            day.append(_clip(e, lo, hi) if isinstance(e, StopEvent) else replace(e, indicators={}))
        day = [e for e in day if e.end > e.start]
        while day and isinstance(day[0], MoveEvent):
            day.pop(0)  # no origin stop recorded
        if day:
            out.append(Timeline(participant, d, cal.day_type(d), day))
        d += timedelta(days=1)
    return out


def build_timelines(t, lat, lon, participant: str, tz: str, pois: PoiIndex | None = None,
                    home: Home | None = None, calendar: SchoolCalendar | None = None,
                    minutes: MinuteData | None = None, reports=(),
                    params: SegmentationParams | None = None, first_day=None, last_day=None):
    events = segment_events(t, lat, lon, pois, home, params)
    timelines = split_days(events, participant, tz, calendar, first_day, last_day)
    for tl in timelines:
        attach_indicators(tl.events, minutes, reports)
    return timelines
