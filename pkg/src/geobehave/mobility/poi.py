"""POI typing of stops and home inference."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..geocell import encode, encode_many
from ..timeutil import to_datetime
from .stops import _dist, _scalar_dist
from .types import StopEvent

HOME_CELL_LEN = 7


@dataclass(frozen=True)
class Home:
    cell: str
    lat: float
    lon: float


@dataclass
class PoiIndex:
    """Categorised POI locations (a loaded snapshot, coordinates kept in memory only)."""

    lat: np.ndarray
    lon: np.ndarray
    category: list

    @classmethod
    def from_pois(cls, pois) -> "PoiIndex":
        pois = list(pois)
        return cls(np.array([p.lat for p in pois], dtype=float),
                   np.array([p.lon for p in pois], dtype=float),
                   [p.category for p in pois])

    def __len__(self) -> int:
        return len(self.category)

    def nearest(self, lat: float, lon: float, radius_m: float) -> str | None:
        """Category of the closest POI within the radius; ties go to the
        lexicographically smallest category."""
        if not len(self):
            return None
        d = _dist(lat, lon, self.lat, self.lon)
        inside = np.nonzero(d <= radius_m)[0]
        if not len(inside):
            return None
        best = min(inside.tolist(), key=lambda k: (d[k], self.category[k]))
        return self.category[best]


def infer_home(t, lat, lon, tz: str, night=(0, 6), cell_len: int = HOME_CELL_LEN) -> Home | None:
    """Modal cell of night-time fixes (local 00:00-06:00); ties to the smaller code."""
    cells = Counter()
    members: dict[str, list[int]] = {}
    t = np.asarray(t, dtype=np.int64)
    hours = np.array([to_datetime(int(ti), tz).hour for ti in t], dtype=int)
    idx = np.nonzero((hours >= night[0]) & (hours < night[1]))[0]
    if len(idx):
        codes = encode_many(np.asarray(lat, dtype=float)[idx], np.asarray(lon, dtype=float)[idx], cell_len)
        for k, c in zip(idx.tolist(), codes):
            cells[c] += 1
            members.setdefault(c, []).append(k)
    if not cells:
        return None
    top = max(cells.values())
    cell = min(c for c, n in cells.items() if n == top)
    idx = members[cell]
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    return Home(cell, float(lat[idx].mean()), float(lon[idx].mean()))


def assign_poi_type(stop: StopEvent, pois: PoiIndex | None, home: Home | None = None,
                    match_radius_m: float = 75.0) -> str:
    """Nearest POI category within the radius, else `home`, else `unknown`."""
    if pois is not None:
        cat = pois.nearest(stop.lat, stop.lon, match_radius_m)
        if cat is not None:
            return cat
    if home is not None:
        if encode(stop.lat, stop.lon, len(home.cell)) == home.cell:
            return "home"
        if _scalar_dist(stop.lat, stop.lon, home.lat, home.lon) <= match_radius_m:
            return "home"
    return "unknown"
