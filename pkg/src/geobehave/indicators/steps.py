"""Step counting by peak detection on the band-passed vector magnitude."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from ..ingest.records import AccelSegment, SensorStream
from .activity import MinuteSeries, _merge_minutes, band_sos, complete_minutes, zero_phase


@dataclass(frozen=True)
class StepParams:
    low_hz: float = 0.5
    high_hz: float = 3.0
    order: int = 4
    min_height_g: float = 0.1
    min_interval_s: float = 0.25
    complete_fraction: float = 0.95


def step_times(seg: AccelSegment, params: StepParams | None = None) -> np.ndarray:
    """Timestamps (ms) of detected steps within one gap-free segment."""
    p = params or StepParams()
    if len(seg) < 3:
        return np.zeros(0, dtype=np.int64)
    vm = seg.magnitude().astype(float) - 1.0
    filt = zero_phase(band_sos(seg.rate_hz, p.low_hz, p.high_hz, p.order), vm)
    distance = max(1, int(round(p.min_interval_s * seg.rate_hz)))
    peaks, _ = signal.find_peaks(filt, height=p.min_height_g, distance=distance)
    return seg.t[peaks]


def count_steps(stream_or_segment, params: StepParams | None = None) -> MinuteSeries:
    """Steps per complete minute; zero for a stationary signal."""
    p = params or StepParams()
    if isinstance(stream_or_segment, SensorStream):
        blocks = list(stream_or_segment.blocks())
    elif isinstance(stream_or_segment, AccelSegment):
        blocks = [stream_or_segment]
    else:
        blocks = list(stream_or_segment)
    parts = []
    for b in blocks:
        if len(b) < 2:
            continue
        minutes, inverse, keep = complete_minutes(b.t, b.rate_hz, p.complete_fraction)
        st = step_times(b, p)
        idx = np.searchsorted(minutes, st - st % 60_000)
        steps = np.bincount(idx, minlength=len(minutes)).astype(np.int64)
        parts.append((minutes[keep], steps[keep]))
    minutes, steps = _merge_minutes(parts, np.int64)
    return MinuteSeries(minutes, steps)
