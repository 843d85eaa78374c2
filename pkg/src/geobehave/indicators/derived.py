"""Derived indicators over a monitoring window.

Inputs are persisted base and self-reported indicator values plus the
participant's timelines; no raw sensor data is needed. Every derived value
takes the minimum quality of the values it was computed from. A derived
indicator whose inputs are missing is omitted and an :class:`Omission`
records why.
"""
from __future__ import annotations

import bisect
import math
from collections import defaultdict
from datetime import date, timedelta

from ..calendar import SchoolCalendar
from ..quality import QualityConfig
from ..timeutil import MS_PER_MIN, day_bounds, local_date, local_ms, to_datetime
from .activity import INTENSITY_CLASSES
from .values import IndicatorValue, Omission

MIN_WINDOW_DAYS = 7
AFTER_SCHOOL_END = "22:00"
ACTIVE_MODES = ("walking", "cycling")


def _q(values, default: float) -> float:
    qs = [v.quality for v in values]
    return round(min(qs), 6) if qs else round(default, 6)


def _pmf(labels) -> dict:
    n = len(labels)
    counts = defaultdict(int)
    for lab in labels:
        counts[lab] += 1
    return {c: counts[c] / n for c in INTENSITY_CLASSES if counts[c]}


def derive_indicators(base, timelines, window: tuple[date, date], tz: str,
                      calendar: SchoolCalendar | None = None, cfg: QualityConfig | None = None):
    """Derived values and omission records for every participant in ``base``.

    ``window`` is an inclusive (first_day, last_day) pair of local dates and
    must span at least seven days. The result is independent of the order
    of ``base`` and ``timelines``.
    """
    first, last = window
    n_days = (last - first).days + 1
    if n_days < MIN_WINDOW_DAYS:
        raise ValueError(f"window of {n_days} days is shorter than {MIN_WINDOW_DAYS}")
    cal = calendar or SchoolCalendar()
    cfg = cfg or QualityConfig()
    w_lo = day_bounds(first, tz)[0]
    w_hi = day_bounds(last, tz)[1]

    by_pid: dict[str, dict[str, list]] = defaultdict(lambda: defaultdict(list))
    for v in base:
        if w_lo <= v.start < w_hi:
            by_pid[v.participant][v.name].append(v)
    tl_by_pid = defaultdict(dict)
    for tl in timelines:
        if first <= tl.date <= last:
            tl_by_pid[tl.participant][tl.date] = tl
    values, omitted = [], []
    for pid in sorted(set(by_pid) | set(tl_by_pid)):
        rows = {k: sorted(v, key=IndicatorValue.sort_key) for k, v in by_pid[pid].items()}
        v, o = _derive_one(pid, rows, tl_by_pid[pid], first, last, n_days, tz, cal, cfg, (w_lo, w_hi))
        values.extend(v)
        omitted.extend(o)
    return values, omitted


def _derive_one(pid, rows, tls, first, last, n_days, tz, cal, cfg, win):
    w_lo, w_hi = win
    weeks = n_days / 7.0
    out: list[IndicatorValue] = []
    omit: list[Omission] = []

    def emit(name, value, used, lo=w_lo, hi=w_hi):
        out.append(IndicatorValue(pid, name, lo, hi, value, _q(used, cfg.accuracy(name))))

    def skip(name, reason, lo=w_lo, hi=w_hi):
        omit.append(Omission(pid, name, lo, hi, reason))

    foods = rows.get("food_category", [])
    if foods:
        fast = [v for v in foods if v.value == "fast_food"]
        emit("fast_food_per_week", len(fast) / weeks, foods)
    else:
        skip("fast_food_per_week", "no food_category reports in window")

    meals = rows.get("meal", [])
    for m in ("breakfast", "lunch", "dinner", "snack"):
        if meals:
            emit(f"{m}_per_week", sum(1 for v in meals if v.value == m) / weeks, meals)
        else:
            skip(f"{m}_per_week", "no meal reports in window")

    # eating schedule adherence: spread of clock times per meal type
    clock = defaultdict(list)
    for v in meals:
        dt = to_datetime(v.start, tz)
        clock[v.value].append(dt.hour * 60 + dt.minute + dt.second / 60.0)
    sds = []
    for m in sorted(clock):
        xs = clock[m]
        if len(xs) >= 2:
            mean = math.fsum(xs) / len(xs)
            sds.append(math.sqrt(math.fsum((x - mean) ** 2 for x in xs) / len(xs)))
    if sds:
        emit("eating_schedule_sd", round(math.fsum(sds) / len(sds), 6), meals)
    else:
        skip("eating_schedule_sd", "no meal type reported at least twice")

    for name, src in (("avg_sleep_hours", "sleep_hours"), ("avg_sleep_interruptions", "sleep_interruptions")):
        nights = rows.get(src, [])
        if nights:
            emit(name, round(math.fsum(v.value for v in nights) / len(nights), 6), nights)
        else:
            skip(name, f"no {src} values in window")

    intensity = rows.get("activity_intensity", [])
    starts = [v.start for v in intensity]
    at_school, after_school = [], []
    d = first
    while d <= last:
        lo, hi = day_bounds(d, tz)
        if cal.day_type(d) == "school":
            s0 = local_ms(d, cal.school_start, tz)
            s1 = local_ms(d, cal.school_end, tz)
            s2 = local_ms(d, AFTER_SCHOOL_END, tz)
            school_rows = _between(intensity, starts, s0, s1)
            after_rows = _between(intensity, starts, s1, s2)
            at_school.extend(school_rows)
            after_school.extend(after_rows)
            if after_rows:
                emit("sedentary_after_school_minutes",
                     float(sum(1 for v in after_rows if v.value == "sedentary")), after_rows, lo, hi)
            else:
                skip("sedentary_after_school_minutes", "no activity_intensity after school", lo, hi)
            tl = tls.get(d)
            if tl is None:
                skip("active_commute_minutes", "no timeline for school day", lo, hi)
            else:
                used = [m for m in tl.moves if m.dest_poi == "school" and m.transport_mode in ACTIVE_MODES]
                mode_rows = [v for v in rows.get("transport_mode", []) if lo <= v.start < hi]
                minutes = math.fsum(m.duration_ms for m in used) / MS_PER_MIN
                emit("active_commute_minutes", round(minutes, 6), mode_rows, lo, hi)
        d += timedelta(days=1)
    for name, sel in (("activity_at_school", at_school), ("activity_after_school", after_school)):
        if sel:
            emit(name, _pmf([v.value for v in sel]), sel)
        else:
            skip(name, "no activity_intensity during the school-day period")
    return out, omit


def _between(rows, starts, lo, hi):
    return rows[bisect.bisect_left(starts, lo):bisect.bisect_left(starts, hi)]


def window_of(days) -> tuple[date, date]:
    days = sorted(days)
    return days[0], days[-1]


def window_from_values(values, tz: str) -> tuple[date, date]:
    ts = [v.start for v in values]
    return local_date(min(ts), tz), local_date(max(ts), tz)
