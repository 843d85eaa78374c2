"""Activity counts, intensity classes and MET estimates from raw acceleration.

Counts follow the usual actigraphy recipe on the vector magnitude: remove
gravity, band-pass 0.25-2.5 Hz, rectify, drop values inside a small
deadband and integrate over one-minute epochs. The integral is scaled to
counts with a fixed gain so results do not depend on the sampling rate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from ..ingest.records import AccelSegment, SensorStream
from ..timeutil import MS_PER_MIN

MIN_RATE_HZ = 5.0
INTENSITY_CLASSES = ("sedentary", "light", "moderate", "vigorous")


@dataclass(frozen=True)
class CountParams:
    low_hz: float = 0.25
    high_hz: float = 2.5
    order: int = 4
    deadband_g: float = 0.005
    gain: float = 250.0  # counts per g*s of rectified filtered signal
    complete_fraction: float = 0.95


@dataclass(frozen=True)
class IntensityParams:
    # upper bounds (exclusive) of sedentary, light, moderate
    cut_points: tuple = (100, 2000, 6000)
    met_anchors: tuple = ((0.0, 1.0), (6000.0, 6.0))


@dataclass
class MinuteSeries:
    """Per-minute values aligned to UTC minute starts (epoch ms)."""

    minute: np.ndarray
    values: np.ndarray
    low_quality: bool = False
    rates: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.minute)

    def as_dict(self) -> dict:
        return dict(zip(self.minute.tolist(), self.values.tolist()))


def band_sos(rate_hz: float, low_hz: float, high_hz: float, order: int = 4):
    """Second-order sections for the band; high edge dropped near Nyquist."""
    nyq = rate_hz / 2.0
    if high_hz >= 0.95 * nyq:
        return signal.butter(order, low_hz, btype="highpass", fs=rate_hz, output="sos")
    return signal.butter(order, [low_hz, high_hz], btype="bandpass", fs=rate_hz, output="sos")


def zero_phase(sos, x: np.ndarray) -> np.ndarray:
    padlen = min(3 * (2 * len(sos) + 1), len(x) - 1)
    if padlen < 1:
        return np.zeros_like(x, dtype=float)
    return signal.sosfiltfilt(sos, x, padlen=padlen)


def complete_minutes(t: np.ndarray, rate_hz: float, fraction: float = 0.95):
    """Minute starts fully covered by samples, and each sample's minute index.

    Returns (minutes, inverse, keep) where ``minutes[inverse]`` is the minute of
    each sample and ``keep`` flags minutes holding at least ``fraction`` of the
    nominal sample count.
    """
    m = t - t % MS_PER_MIN
    step = np.diff(m)
    if (step >= 0).all():
        # sorted timestamps: minute runs are contiguous, no sort needed
        starts = np.concatenate(([0], np.flatnonzero(step) + 1)) if len(m) else np.zeros(0, dtype=np.int64)
        minutes = m[starts]
        n = np.diff(np.append(starts, len(m)))
        inverse = np.repeat(np.arange(len(starts)), n)
    else:
        minutes, inverse, n = np.unique(m, return_inverse=True, return_counts=True)
    keep = n >= fraction * rate_hz * 60.0
    return minutes, inverse, keep


def _block_counts(seg: AccelSegment, p: CountParams) -> tuple[np.ndarray, np.ndarray]:
    vm = seg.magnitude().astype(float) - 1.0
    filt = np.abs(zero_phase(band_sos(seg.rate_hz, p.low_hz, p.high_hz, p.order), vm))
    filt[filt < p.deadband_g] = 0.0
    minutes, inverse, keep = complete_minutes(seg.t, seg.rate_hz, p.complete_fraction)
    sums = np.bincount(inverse, weights=filt, minlength=len(minutes))
    counts = np.round(sums * p.gain / seg.rate_hz).astype(np.int64)
    return minutes[keep], counts[keep]


def _merge_minutes(parts: list[tuple[np.ndarray, np.ndarray]], dtype) -> tuple[np.ndarray, np.ndarray]:
    if not parts:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=dtype)
    minutes = np.concatenate([p[0] for p in parts])
    values = np.concatenate([p[1] for p in parts])
    # a minute split across two blocks is incomplete in both and already dropped;
    # duplicates can still arise from segments meeting mid-minute, keep the first
    minutes, first = np.unique(minutes, return_index=True)
    return minutes, values[first]


def activity_counts(stream_or_segment, params: CountParams | None = None) -> MinuteSeries:
    """Counts per complete minute; minutes inside recording gaps are omitted.

    A sampling rate under 5 Hz still yields counts, flagged as low quality.
    """
    p = params or CountParams()
    if isinstance(stream_or_segment, SensorStream):
        blocks = list(stream_or_segment.blocks())
    elif isinstance(stream_or_segment, AccelSegment):
        blocks = [stream_or_segment]
    else:
        blocks = list(stream_or_segment)
    parts = []
    low = False
    for b in blocks:
        if len(b) < 2:
            continue
        if b.rate_hz < MIN_RATE_HZ:
            low = True
        parts.append(_block_counts(b, p))
    minutes, counts = _merge_minutes(parts, np.int64)
    return MinuteSeries(minutes, counts, low_quality=low)


def classify_counts(counts, params: IntensityParams | None = None) -> np.ndarray:
    """Intensity class index per minute (0 sedentary .. 3 vigorous)."""
    p = params or IntensityParams()
    return np.searchsorted(np.asarray(p.cut_points), np.asarray(counts), side="right")


def met_from_counts(counts, params: IntensityParams | None = None) -> np.ndarray:
    """Piecewise-linear counts to MET map, extrapolated past the last anchor."""
    p = params or IntensityParams()
    xs = np.array([a[0] for a in p.met_anchors], dtype=float)
    ys = np.array([a[1] for a in p.met_anchors], dtype=float)
    c = np.asarray(counts, dtype=float)
    met = np.interp(c, xs, ys)
    slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
    over = c > xs[-1]
    met[over] = ys[-1] + slope * (c[over] - xs[-1])
    return np.maximum(met, 1.0)


def classify_activity(counts: MinuteSeries | np.ndarray, params: IntensityParams | None = None):
    """Per-minute intensity labels and MET estimates.

    Returns (labels, met) as arrays of the same length as the input.
    """
    values = counts.values if isinstance(counts, MinuteSeries) else np.asarray(counts)
    idx = classify_counts(values, params)
    labels = np.array(INTENSITY_CLASSES, dtype=object)[idx] if len(idx) else np.zeros(0, dtype=object)
    return labels, met_from_counts(values, params)
