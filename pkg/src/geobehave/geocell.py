"""Geohash cells: encoding, decoding, coarsening and cell areas.

Cells are plain lowercase base32 strings. Every prefix of a valid code is
itself a valid (larger) cell, which is what the aggregation layer relies on
when it coarsens regions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BASE32 = "0123456789bcdefghjkmnpqrstuvwxyz"
_DECODE_MAP = {c: i for i, c in enumerate(BASE32)}

MAX_PRECISION = 12
EARTH_RADIUS_KM = 6371.0088


class GeocellError(ValueError):
    """Invalid coordinates, precision or geohash code."""


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        validate_point(self.lat, self.lon)


@dataclass(frozen=True)
class BoundingBox:
    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float

    @property
    def center(self) -> tuple[float, float]:
        return (self.min_lat + self.max_lat) / 2, (self.min_lon + self.max_lon) / 2

    @property
    def height(self) -> float:
        return self.max_lat - self.min_lat

    @property
    def width(self) -> float:
        return self.max_lon - self.min_lon

    def contains(self, lat: float, lon: float) -> bool:
        """Closed-box containment (edges count as inside)."""
        return self.min_lat <= lat <= self.max_lat and self.min_lon <= lon <= self.max_lon

    def contains_box(self, other: "BoundingBox") -> bool:
        return (
            self.min_lat <= other.min_lat
            and other.max_lat <= self.max_lat
            and self.min_lon <= other.min_lon
            and other.max_lon <= self.max_lon
        )

    def corners(self) -> list[tuple[float, float]]:
        """Closed ring of (lon, lat) corners, counter-clockwise, GeoJSON order."""
        return [
            (self.min_lon, self.min_lat),
            (self.max_lon, self.min_lat),
            (self.max_lon, self.max_lat),
            (self.min_lon, self.max_lat),
            (self.min_lon, self.min_lat),
        ]


def validate_point(lat: float, lon: float) -> None:
    if not isinstance(lat, (int, float)) or not isinstance(lon, (int, float)):
        raise GeocellError(f"coordinates must be numbers, got {lat!r}, {lon!r}")
    if math.isnan(lat) or math.isnan(lon):
        raise GeocellError("NaN coordinate")
    if not -90.0 <= lat <= 90.0:
        raise GeocellError(f"latitude {lat} outside [-90, 90]")
    if not -180.0 <= lon <= 180.0:
        raise GeocellError(f"longitude {lon} outside [-180, 180]")


def validate_code(code: str) -> str:
    if not isinstance(code, str) or not 1 <= len(code) <= MAX_PRECISION:
        raise GeocellError(f"geohash must be a string of length 1..{MAX_PRECISION}: {code!r}")
    for ch in code:
        if ch not in _DECODE_MAP:
            raise GeocellError(f"invalid geohash character {ch!r} in {code!r}")
    return code


def is_valid_code(code: str) -> bool:
    try:
        validate_code(code)
    except GeocellError:
        return False
    return True


def encode(lat: float, lon: float, precision: int = MAX_PRECISION) -> str:
    """Geohash of (lat, lon) with exactly `precision` characters.

    Bisection uses the lower half-open convention: a value equal to an
    interval midpoint goes to the upper half, so boundary points belong to
    the cell whose half-open interval [lo, hi) contains them.
    """
    validate_point(lat, lon)
    if isinstance(precision, bool) or not isinstance(precision, int) or not 1 <= precision <= MAX_PRECISION:
        raise GeocellError(f"precision must be an integer in 1..{MAX_PRECISION}: {precision!r}")
    lat_lo, lat_hi = -90.0, 90.0
    lon_lo, lon_hi = -180.0, 180.0
    chars = []
    bits = 0
    n_bits = 0
    even = True  # even bits refine longitude
    while len(chars) < precision:
        if even:
            mid = (lon_lo + lon_hi) / 2
            if lon >= mid:
                bits = (bits << 1) | 1
                lon_lo = mid
            else:
                bits <<= 1
                lon_hi = mid
        else:
            mid = (lat_lo + lat_hi) / 2
            if lat >= mid:
                bits = (bits << 1) | 1
                lat_lo = mid
            else:
                bits <<= 1
                lat_hi = mid
        even = not even
        n_bits += 1
        if n_bits == 5:
            chars.append(BASE32[bits])
            bits = 0
            n_bits = 0
    return "".join(chars)


def encode_many(lat, lon, precision: int = MAX_PRECISION) -> list[str]:
    """Vectorised :func:`encode`; same bisection, same results."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    if lat.shape != lon.shape or lat.ndim != 1:
        raise GeocellError("lat and lon must be 1-d arrays of equal length")
    if not (np.isfinite(lat).all() and np.isfinite(lon).all()):
        raise GeocellError("non-finite coordinate")
    if (np.abs(lat) > 90).any() or (np.abs(lon) > 180).any():
        raise GeocellError("coordinate out of range")
    if isinstance(precision, bool) or not isinstance(precision, int) or not 1 <= precision <= MAX_PRECISION:
        raise GeocellError(f"precision must be an integer in 1..{MAX_PRECISION}: {precision!r}")
    n = len(lat)
    lo = [np.full(n, -90.0), np.full(n, -180.0)]
    hi = [np.full(n, 90.0), np.full(n, 180.0)]
    val = [lat, lon]
    digits = np.zeros((n, precision), dtype=np.int64)
    axis = 1  # even bits refine longitude
    for k in range(precision * 5):
        mid = (lo[axis] + hi[axis]) / 2
        up = val[axis] >= mid
        digits[:, k // 5] = (digits[:, k // 5] << 1) | up
        lo[axis] = np.where(up, mid, lo[axis])
        hi[axis] = np.where(up, hi[axis], mid)
        axis = 1 - axis
    table = np.array(list(BASE32))
    return ["".join(row) for row in table[digits].tolist()]


def encode_point(p: GeoPoint, precision: int = MAX_PRECISION) -> str:
    return encode(p.lat, p.lon, precision)


def decode(code: str) -> BoundingBox:
    validate_code(code)
    lat_lo, lat_hi = -90.0, 90.0
    lon_lo, lon_hi = -180.0, 180.0
    even = True
    for ch in code:
        value = _DECODE_MAP[ch]
        for shift in range(4, -1, -1):
            bit = (value >> shift) & 1
            if even:
                mid = (lon_lo + lon_hi) / 2
                if bit:
                    lon_lo = mid
                else:
                    lon_hi = mid
            else:
                mid = (lat_lo + lat_hi) / 2
                if bit:
                    lat_lo = mid
                else:
                    lat_hi = mid
            even = not even
    return BoundingBox(lat_lo, lat_hi, lon_lo, lon_hi)


def center(code: str) -> tuple[float, float]:
    return decode(code).center


def coarsen(code: str, new_len: int) -> str:
    """Prefix of `code` with `new_len` characters (the containing cell)."""
    validate_code(code)
    if not 1 <= new_len <= len(code):
        raise GeocellError(f"cannot coarsen {code!r} (length {len(code)}) to length {new_len}")
    return code[:new_len]


def children(code: str) -> list[str]:
    """The 32 cells one character longer than `code`."""
    validate_code(code)
    if len(code) >= MAX_PRECISION:
        raise GeocellError(f"{code!r} is already at maximum precision")
    return [code + ch for ch in BASE32]


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters on the spherical Earth."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_KM * 1000.0 * math.asin(min(1.0, math.sqrt(a)))


def box_area_km2(box: BoundingBox) -> float:
    """Area of a lat/lon box on the sphere.

    Uses the exact spherical zone formula R^2 * dlon * (sin(lat2) - sin(lat1)).
    """
    dlon = math.radians(box.width)
    band = math.sin(math.radians(box.max_lat)) - math.sin(math.radians(box.min_lat))
    return EARTH_RADIUS_KM**2 * dlon * band


def cell_area_km2(code: str) -> float:
    return box_area_km2(decode(code))
