from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date

TRANSPORT_MODES = ("walking", "cycling", "vehicle")
DAY_TYPES = ("school", "non_school")


class TimelineError(ValueError):
    pass


@dataclass
class StopEvent:
    start: int
    end: int
    lat: float
    lon: float
    poi_type: str = "unknown"
    n_fixes: int = 0
    gap: bool = False  # placeholder stop bridging an unrecorded stretch
    indicators: dict = field(default_factory=dict)

    kind = "stop"

    @property
    def duration_ms(self) -> int:
        return self.end - self.start

    def to_dict(self, with_coordinates: bool = True) -> dict:
        d = {"kind": "stop", "start": self.start, "end": self.end, "poi_type": self.poi_type,
             "n_fixes": self.n_fixes, "indicators": self.indicators}
        if self.gap:
            d["gap"] = True
        if with_coordinates:
            d["lat"] = round(self.lat, 6)
            d["lon"] = round(self.lon, 6)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StopEvent":
        return cls(d["start"], d["end"], d.get("lat", float("nan")), d.get("lon", float("nan")),
                   d.get("poi_type", "unknown"), d.get("n_fixes", 0), d.get("gap", False),
                   dict(d.get("indicators", {})))


@dataclass
class MoveEvent:
    start: int
    end: int
    origin_poi: str = "unknown"
    dest_poi: str = "unknown"
    distance_m: float = 0.0
    transport_mode: str = "walking"
    n_fixes: int = 0
    mode_quality: float | None = None
    indicators: dict = field(default_factory=dict)

    kind = "move"

    @property
    def duration_ms(self) -> int:
        return self.end - self.start

    def to_dict(self, with_coordinates: bool = True) -> dict:
        d = {"kind": "move", "start": self.start, "end": self.end, "origin_poi": self.origin_poi,
             "dest_poi": self.dest_poi, "distance_m": round(self.distance_m, 2),
             "transport_mode": self.transport_mode, "n_fixes": self.n_fixes,
             "indicators": self.indicators}
        if self.mode_quality is not None:
            d["mode_quality"] = self.mode_quality
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MoveEvent":
        return cls(d["start"], d["end"], d.get("origin_poi", "unknown"), d.get("dest_poi", "unknown"),
                   d.get("distance_m", 0.0), d.get("transport_mode", "walking"), d.get("n_fixes", 0),
                   d.get("mode_quality"), dict(d.get("indicators", {})))


@dataclass
class Timeline:
    participant: str
    date: date
    day_type: str
    events: list = field(default_factory=list)

    @property
    def stops(self) -> list[StopEvent]:
        return [e for e in self.events if isinstance(e, StopEvent)]

    @property
    def moves(self) -> list[MoveEvent]:
        return [e for e in self.events if isinstance(e, MoveEvent)]

    def validate(self) -> None:
        if self.day_type not in DAY_TYPES:
            raise TimelineError(f"unknown day type {self.day_type!r}")
        prev = None
        for i, e in enumerate(self.events):
            if e.end <= e.start:
                raise TimelineError(f"event {i} has end <= start")
            if prev is not None:
                if type(prev) is type(e):
                    raise TimelineError(f"events {i - 1} and {i} do not alternate")
                if e.start < prev.end:
                    raise TimelineError(f"event {i} overlaps its predecessor")
                if isinstance(e, MoveEvent) and e.origin_poi != prev.poi_type:
                    raise TimelineError(f"move {i} origin does not match preceding stop")
                if isinstance(prev, MoveEvent) and prev.dest_poi != e.poi_type:
                    raise TimelineError(f"move {i - 1} destination does not match following stop")
            prev = e

    def to_dict(self, with_coordinates: bool = True) -> dict:
        return {"participant": self.participant, "date": self.date.isoformat(),
                "day_type": self.day_type,
                "events": [e.to_dict(with_coordinates) for e in self.events]}

    @classmethod
    def from_dict(cls, d: dict) -> "Timeline":
        events = [StopEvent.from_dict(e) if e["kind"] == "stop" else MoveEvent.from_dict(e)
                  for e in d["events"]]
        return cls(d["participant"], date.fromisoformat(d["date"]), d["day_type"], events)
