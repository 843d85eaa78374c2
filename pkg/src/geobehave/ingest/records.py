"""Sensor stream data model.

Accelerometer data is kept as numpy arrays grouped in segments with a
nominal sampling rate each, since raw streams run to millions of samples
per participant. GPS fixes and self-reports are small and kept as plain
records.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from ..geocell import GeocellError, validate_point
from ..timeutil import MS_PER_MIN

GAP_THRESHOLD_MS = 5 * MS_PER_MIN
MAX_ACCEL_G = 16.0

DEVICE_CLASSES = ("smartwatch", "smartphone")
REPORT_KINDS = ("meal", "food_ad")
MEAL_TYPES = ("breakfast", "lunch", "dinner", "snack")

_EMAIL = re.compile(r"[^@\s]+@[^@\s]+\.[a-z]{2,}", re.I)


class RecordError(ValueError):
    """A single record failed validation."""


class StreamError(ValueError):
    """A whole stream is unusable (e.g. too many rejected records)."""


@dataclass(frozen=True)
class Participant:
    id: str
    age_band: str = "unknown"
    gender: str = "unknown"
    device_class: str = "smartphone"
    school_calendar_id: str | None = None
    timezone: str = "UTC"

    def __post_init__(self):
        if not self.id or not isinstance(self.id, str):
            raise RecordError("participant id must be a non-empty string")
        if _EMAIL.search(self.id) or " " in self.id.strip():
            raise RecordError(f"participant id looks like a direct identifier: {self.id!r}")
        if self.device_class not in DEVICE_CLASSES:
            raise RecordError(f"unknown device class {self.device_class!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "age_band": self.age_band,
            "gender": self.gender,
            "device_class": self.device_class,
            "school_calendar_id": self.school_calendar_id,
            "timezone": self.timezone,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Participant":
        allowed = {"id", "age_band", "gender", "device_class", "school_calendar_id", "timezone"}
        extra = set(d) - allowed
        if extra:
            # names, emails and the like are refused outright
            raise RecordError(f"unexpected participant fields {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True)
class GpsSample:
    t: int
    lat: float
    lon: float
    accuracy_m: float = 10.0

    def __post_init__(self):
        try:
            validate_point(self.lat, self.lon)
        except GeocellError as exc:
            raise RecordError(str(exc)) from None
        if not (self.accuracy_m >= 0 and math.isfinite(self.accuracy_m)):
            raise RecordError(f"accuracy must be a nonnegative number: {self.accuracy_m!r}")


@dataclass(frozen=True)
class SelfReportEvent:
    t: int
    kind: str
    meal_type: str | None = None
    food_category: str | None = None
    photo_ref: str | None = None

    def __post_init__(self):
        if self.kind not in REPORT_KINDS:
            raise RecordError(f"unknown report kind {self.kind!r}")
        if self.kind == "meal":
            if self.meal_type not in MEAL_TYPES:
                raise RecordError(f"meal report needs meal_type in {MEAL_TYPES}, got {self.meal_type!r}")
        elif self.meal_type is not None:
            raise RecordError("meal_type is only allowed on meal reports")

    def to_dict(self) -> dict:
        d = {"t": self.t, "report_kind": self.kind}
        if self.meal_type is not None:
            d["meal_type"] = self.meal_type
        if self.food_category is not None:
            d["food_category"] = self.food_category
        if self.photo_ref is not None:
            d["photo_ref"] = self.photo_ref
        return d


@dataclass
class AccelSegment:
    """Contiguous accelerometer block recorded at one nominal rate."""

    t: np.ndarray  # int64 epoch ms
    xyz: np.ndarray  # (n, 3) float, g units
    rate_hz: float

    def __len__(self) -> int:
        return len(self.t)

    @property
    def start(self) -> int:
        return int(self.t[0])

    @property
    def end(self) -> int:
        return int(self.t[-1])

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.einsum("ij,ij->i", self.xyz, self.xyz))


def validate_accel_arrays(t: np.ndarray, xyz: np.ndarray) -> None:
    if len(t) != len(xyz):
        raise RecordError("timestamp and sample arrays differ in length")
    if len(t) > 1 and np.any(np.diff(t) <= 0):
        raise RecordError("accelerometer timestamps not strictly increasing")
    if not np.all(np.isfinite(xyz)):
        raise RecordError("non-finite accelerometer component")
    if len(xyz) and np.max(np.einsum("ij,ij->i", xyz, xyz)) >= MAX_ACCEL_G**2:
        raise RecordError(f"acceleration magnitude >= {MAX_ACCEL_G} g")


def find_gaps(t: np.ndarray, threshold_ms: int = GAP_THRESHOLD_MS) -> list[tuple[int, int]]:
    """Maximal sample-free intervals longer than the threshold."""
    if len(t) < 2:
        return []
    d = np.diff(t)
    idx = np.nonzero(d > threshold_ms)[0]
    return [(int(t[i]), int(t[i + 1])) for i in idx]


@dataclass
class SensorStream:
    participant: str
    accel: list[AccelSegment] = field(default_factory=list)
    gps: list[GpsSample] = field(default_factory=list)
    reports: list[SelfReportEvent] = field(default_factory=list)
    timezone: str = "UTC"
    gaps: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.validate()
        self.gaps = find_gaps(self.accel_t())

    def validate(self) -> None:
        prev = None
        for seg in self.accel:
            validate_accel_arrays(seg.t, seg.xyz)
            if not 0 < seg.rate_hz <= 1000:
                raise RecordError(f"implausible sampling rate {seg.rate_hz}")
            if len(seg) and prev is not None and seg.start <= prev:
                raise RecordError("accelerometer segments overlap or are out of order")
            if len(seg):
                prev = seg.end
        for seq, name in ((self.gps, "gps"), (self.reports, "report")):
            for a, b in zip(seq, seq[1:]):
                if b.t <= a.t:
                    raise RecordError(f"{name} timestamps not strictly increasing")

    def accel_t(self) -> np.ndarray:
        if not self.accel:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate([s.t for s in self.accel])

    @property
    def n_accel(self) -> int:
        return sum(len(s) for s in self.accel)

    def gps_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        t = np.array([g.t for g in self.gps], dtype=np.int64)
        lat = np.array([g.lat for g in self.gps], dtype=float)
        lon = np.array([g.lon for g in self.gps], dtype=float)
        return t, lat, lon

    def blocks(self, threshold_ms: int = GAP_THRESHOLD_MS):
        """Yield gap-free accel segments (segments split at recording gaps)."""
        for seg in self.accel:
            if len(seg) == 0:
                continue
            cut = (np.nonzero(np.diff(seg.t) > threshold_ms)[0] + 1).tolist()
            for a, b in zip([0] + cut, cut + [len(seg)]):
                yield AccelSegment(seg.t[a:b], seg.xyz[a:b], seg.rate_hz)
