"""Stop detection on minute-cadence GPS fixes.

A density-based, time-ordered clustering in the spirit of DBSCAN variants
for trajectories: a stop grows from a seed fix while new fixes stay within
``eps_m`` of the running centroid. A fix outside the radius ends the stop
unless one of the following ``min_pts - 1`` fixes comes back inside, in
which case it is treated as noise. A stop needs ``min_pts`` fixes spanning
at least ``min_duration``. Adjacent stops at the same place are merged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geocell import EARTH_RADIUS_KM
from ..timeutil import MS_PER_MIN
from .types import StopEvent

_R_M = EARTH_RADIUS_KM * 1000.0


@dataclass(frozen=True)
class StopParams:
    eps_m: float = 75.0
    min_duration_ms: int = 10 * MS_PER_MIN
    min_pts: int = 3

    def __post_init__(self):
        if self.eps_m <= 0 or self.min_duration_ms <= 0 or self.min_pts <= 0:
            raise ValueError("stop detection parameters must be positive")


def _dist(lat1, lon1, lat2, lon2):
    """Haversine distance in meters; vectorised over numpy inputs."""
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    a = np.sin((p2 - p1) / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(np.radians(lon2 - lon1) / 2) ** 2
    return 2 * _R_M * np.arcsin(np.sqrt(np.minimum(1.0, a)))


def _scalar_dist(lat1, lon1, lat2, lon2) -> float:
    p1 = math.radians(lat1)
    p2 = math.radians(lat2)
    a = math.sin((p2 - p1) / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(math.radians(lon2 - lon1) / 2) ** 2
    return 2 * _R_M * math.asin(math.sqrt(min(1.0, a)))


def detect_stop_indices(t, lat, lon, params: StopParams | None = None) -> list[tuple[int, int]]:
    """Inclusive (first, last) fix indices of each detected stop."""
    p = params or StopParams()
    t = np.asarray(t)
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    n = len(t)
    if n < 2:
        return []
    if np.all(lat == lat[0]) and np.all(lon == lon[0]):
        return [(0, n - 1)]
    lat_l = lat.tolist()
    lon_l = lon.tolist()
    out = []
    i = 0
    while i < n:
        slat, slon, k = lat_l[i], lon_l[i], 1
        last = i
        j = i + 1
        while j < n:
            clat, clon = slat / k, slon / k
            if _scalar_dist(clat, clon, lat_l[j], lon_l[j]) <= p.eps_m:
                slat += lat_l[j]
                slon += lon_l[j]
                k += 1
                last = j
                j += 1
                continue
            back = False
            for q in range(j + 1, min(n, j + p.min_pts)):
                if _scalar_dist(clat, clon, lat_l[q], lon_l[q]) <= p.eps_m:
                    back = True
                    break
            if not back:
                break
            j += 1
        if k >= p.min_pts and t[last] - t[i] >= p.min_duration_ms:
            out.append((i, last))
            i = last + 1
        else:
            i += 1
    return _merge(out, t, lat, lon, p)


def _centroid(lat, lon, a, b):
    return float(np.mean(lat[a:b + 1])), float(np.mean(lon[a:b + 1]))


def _merge(spans, t, lat, lon, p: StopParams):
    merged: list[tuple[int, int]] = []
    for a, b in spans:
        if merged:
            pa, pb = merged[-1]
            c1 = _centroid(lat, lon, pa, pb)
            c2 = _centroid(lat, lon, a, b)
            between = a - pb - 1
            if (_scalar_dist(*c1, *c2) <= p.eps_m and between < p.min_pts
                    and t[a] - t[pb] <= p.min_duration_ms):
                merged[-1] = (pa, b)
                continue
        merged.append((a, b))
    return merged


def detect_stops(t, lat, lon, params: StopParams | None = None) -> list[StopEvent]:
    """Stops as events with centroid, span and fix count."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    out = []
    for a, b in detect_stop_indices(t, lat, lon, params):
        clat, clon = _centroid(lat, lon, a, b)
        end = int(t[b])
        if end <= int(t[a]):
            end = int(t[a]) + 1
        out.append(StopEvent(int(t[a]), end, clat, clon, n_fixes=b - a + 1))
    return out
