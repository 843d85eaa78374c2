from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stops import _dist

VERY_LOW_QUALITY = 0.2


@dataclass(frozen=True)
class TransportParams:
    walking_max_kmh: float = 7.0
    cycling_max_kmh: float = 16.0


def segment_speeds_kmh(t, lat, lon) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    if len(t) < 2:
        return np.zeros(0)
    d = _dist(lat[:-1], lon[:-1], lat[1:], lon[1:])
    dt_h = np.diff(t) / 3_600_000.0
    ok = dt_h > 0
    return d[ok] / 1000.0 / dt_h[ok]


def mode_for_speed(speed_kmh: float, params: TransportParams | None = None) -> str:
    p = params or TransportParams()
    if speed_kmh < p.walking_max_kmh:
        return "walking"
    if speed_kmh <= p.cycling_max_kmh:
        return "cycling"
    return "vehicle"


def classify_transport(t, lat, lon, params: TransportParams | None = None) -> tuple[str, float | None]:
    """Mode from the median segment speed of a move's fixes.

    Returns (mode, quality flag); a move with a single fix falls back to
    walking with a very-low quality flag.
    """
    speeds = segment_speeds_kmh(t, lat, lon)
    if len(speeds) == 0:
        return "walking", VERY_LOW_QUALITY
    return mode_for_speed(float(np.median(speeds)), params), None
