"""Base and self-reported indicators for one participant's stream.

This is the edge-side step: raw acceleration and GPS go in, indicator
values come out, and nothing downstream needs the raw data again.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import timedelta

import numpy as np

from ..geocell import encode_many
from ..ingest.availability import compute_availability, stream_days
from ..ingest.records import Participant, SensorStream
from ..mobility.timeline import MinuteData
from ..quality import QualityConfig, availability_quality, combine_intersect, intersect_all, source_quality
from ..timeutil import MS_PER_MIN, day_bounds
from .activity import INTENSITY_CLASSES, CountParams, IntensityParams, activity_counts, classify_counts, met_from_counts
from .sleep import SleepParams, detect_sleep_from_counts, night_window
from .steps import StepParams, count_steps
from .values import IndicatorValue

CELL_LEN = 7
CELL_MATCH_MS = 5 * MS_PER_MIN  # a fix this close in time locates a minute


@dataclass(frozen=True)
class ExtractionParams:
    counts: CountParams = field(default_factory=CountParams)
    intensity: IntensityParams = field(default_factory=IntensityParams)
    steps: StepParams = field(default_factory=StepParams)
    sleep: SleepParams = field(default_factory=SleepParams)


class CellLocator:
    """Geocell of the GPS fix closest in time to a timestamp."""

    def __init__(self, t, lat, lon, length: int = CELL_LEN, max_ms: int = CELL_MATCH_MS):
        self.t = np.asarray(t, dtype=np.int64)
        self.cells = np.array(encode_many(lat, lon, length) if len(lat) else [], dtype=object)
        self.max_ms = max_ms

    def locate(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=np.int64)
        out = np.full(len(ts), None, dtype=object)
        if len(self.t) == 0 or len(ts) == 0:
            return out
        n = len(self.t)
        j = np.searchsorted(self.t, ts)
        left = np.clip(j - 1, 0, n - 1)
        right = np.clip(j, 0, n - 1)
        dl = np.abs(ts - self.t[left])
        dr = np.abs(self.t[right] - ts)
        best = np.where(dl <= dr, left, right)
        ok = np.minimum(dl, dr) <= self.max_ms
        out[ok] = self.cells[best[ok]]
        return out


@dataclass
class BaseIndicators:
    """Everything extracted from one stream."""

    participant: str
    values: list
    minutes: MinuteData
    day_quality: dict  # date -> {"accel": q, "gps": q, "accel_hours": h, "gps_hours": h}
    days: list


def day_qualities(stream: SensorStream, source: str, cfg: QualityConfig) -> dict:
    src = source_quality(source, cfg.sources)
    out = {}
    for d in stream_days(stream):
        av = compute_availability(stream, d)
        qa = availability_quality(av["accel_hours"], cfg.thresholds["accel_hours_per_day"])
        qg = availability_quality(av["gps_hours"], cfg.thresholds["gps_hours_per_day"])
        out[d] = {"accel": combine_intersect(qa, src, cfg.norm).value,
                  "gps": combine_intersect(qg, src, cfg.norm).value,
                  "accel_hours": av["accel_hours"], "gps_hours": av["gps_hours"]}
    return out


def _day_index(ts: np.ndarray, days: list, tz: str) -> np.ndarray:
    """Index into ``days`` of each timestamp (-1 outside)."""
    starts = np.array([day_bounds(d, tz)[0] for d in days] + [day_bounds(days[-1], tz)[1]], dtype=np.int64)
    k = np.searchsorted(starts, ts, side="right") - 1
    k[(k < 0) | (k >= len(days))] = -1
    return k


def extract_base(stream: SensorStream, participant: Participant | None = None,
                 params: ExtractionParams | None = None, cfg: QualityConfig | None = None) -> BaseIndicators:
    p = params or ExtractionParams()
    cfg = cfg or QualityConfig()
    pid = stream.participant
    tz = stream.timezone
    source = participant.device_class if participant is not None else "smartphone"
    days = stream_days(stream)
    dq = day_qualities(stream, source, cfg)
    gt, glat, glon = stream.gps_arrays()
    where = CellLocator(gt, glat, glon)

    blocks = list(stream.blocks())
    counts = activity_counts(blocks, p.counts)
    steps = count_steps(blocks, p.steps)
    # both series use the same complete minutes; align defensively
    steps_v = np.zeros(len(counts), dtype=np.int64)
    pos = np.searchsorted(steps.minute, counts.minute)
    hit = (pos < len(steps.minute)) & (steps.minute[np.minimum(pos, len(steps.minute) - 1)] == counts.minute)
    steps_v[hit] = steps.values[pos[hit]]
    intensity = classify_counts(counts.values, p.intensity)
    met = met_from_counts(counts.values, p.intensity)
    minutes = MinuteData(counts.minute, counts.values, steps_v, intensity)

    values: list[IndicatorValue] = []
    if days and len(counts):
        k = _day_index(counts.minute, days, tz)
        base_q = np.array([dq[d]["accel"] for d in days] + [0.2])[k]
        if counts.low_quality:
            base_q = np.minimum(base_q, 0.2)
        cells = where.locate(counts.minute + MS_PER_MIN // 2)

        def q_for(name):
            return np.minimum(base_q, cfg.accuracy(name))

        for name, vals, fmt in (("activity_counts", counts.values, int),
                                ("activity_intensity", intensity, lambda i: INTENSITY_CLASSES[i]),
                                ("met", met, lambda x: round(float(x), 4)),
                                ("steps", steps_v, int)):
            q = q_for(name).round(6).tolist()
            for m, v, qq, c in zip(counts.minute.tolist(), vals.tolist(), q, cells.tolist()):
                values.append(IndicatorValue(pid, name, m, m + MS_PER_MIN, fmt(v), qq, c))

    # daily steps over recorded minutes
    for d in days:
        lo, hi = day_bounds(d, tz)
        sel = (minutes.minute >= lo) & (minutes.minute < hi)
        if not sel.any():
            continue
        q = min(dq[d]["accel"], cfg.accuracy("daily_steps"))
        values.append(IndicatorValue(pid, "daily_steps", lo, hi, int(minutes.steps[sel].sum()), round(q, 6)))

    # sleep for nights fully inside the recorded days
    day_set = set(days)
    for d in days:
        if d + timedelta(days=1) not in day_set:
            continue
        res = detect_sleep_from_counts(counts, d, tz, p.sleep)
        lo, hi = night_window(d, tz, p.sleep)
        q = intersect_all([dq[d]["accel"], dq[d + timedelta(days=1)]["accel"],
                           cfg.accuracy("sleep_hours")] + ([res.quality_flag] if res.quality_flag else []),
                          cfg.norm).value
        values.append(IndicatorValue(pid, "sleep_hours", lo, hi, round(res.hours, 4), round(q, 6)))
        values.append(IndicatorValue(pid, "sleep_interruptions", lo, hi, res.interruptions, round(q, 6)))

    # self-reports
    src = source_quality(source, cfg.sources).value
    rep_cells = where.locate([r.t for r in stream.reports])
    for r, c in zip(stream.reports, rep_cells.tolist()):
        if r.kind != "meal":
            continue
        if r.meal_type is not None:
            values.append(IndicatorValue(pid, "meal", r.t, r.t, r.meal_type,
                                         round(min(src, cfg.accuracy("meal")), 6), c))
        if r.food_category is not None:
            values.append(IndicatorValue(pid, "food_category", r.t, r.t, r.food_category,
                                         round(min(src, cfg.accuracy("food_category")), 6), c))
    return BaseIndicators(pid, values, minutes, dq, days)


def transport_values(timelines, day_quality: dict, locate: CellLocator | None,
                     cfg: QualityConfig | None = None) -> list[IndicatorValue]:
    """transport_mode values for the moves of a participant's timelines."""
    cfg = cfg or QualityConfig()
    out = []
    for tl in timelines:
        dq = day_quality.get(tl.date, {}).get("gps", 0.2)
        for mv in tl.moves:
            q = min(dq, cfg.accuracy("transport_mode"))
            if mv.mode_quality is not None:
                q = min(q, mv.mode_quality)
            cell = locate.locate([mv.start])[0] if locate is not None else None
            out.append(IndicatorValue(tl.participant, "transport_mode", mv.start, mv.end,
                                      mv.transport_mode, round(q, 6), cell))
    return out
