"""Indicator values and their JSONL persistence.

One row per value::

    {"pid": .., "name": .., "window": [start_ms, end_ms], "value": ..,
     "quality": .., "cell": ..}

``cell`` is optional: the 7-character geocell where the value was observed,
present for values tied to a place and time (minute-level indicators).
Point events such as meal reports have ``start == end``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class IndicatorValue:
    participant: str
    name: str
    start: int
    end: int
    value: object
    quality: float = 1.0
    cell: str | None = None

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"{self.name}: window end before start")
        if not 0.0 <= self.quality <= 1.0:
            raise ValueError(f"{self.name}: quality {self.quality!r} outside [0, 1]")
        if isinstance(self.value, float) and not math.isfinite(self.value):
            raise ValueError(f"{self.name}: non-finite value")

    def sort_key(self):
        return (self.participant, self.name, self.start, self.end, _value_key(self.value), self.cell or "")

    def to_row(self) -> dict:
        row = {"pid": self.participant, "name": self.name, "window": [self.start, self.end],
               "value": self.value, "quality": self.quality}
        if self.cell is not None:
            row["cell"] = self.cell
        return row

    @classmethod
    def from_row(cls, row: dict) -> "IndicatorValue":
        s, e = row["window"]
        return cls(row["pid"], row["name"], int(s), int(e), row["value"], float(row.get("quality", 1.0)),
                   row.get("cell"))


def _value_key(value):
    # values of one indicator share a type; numbers order numerically, the rest by their JSON text
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (0, value, "")
    return (1, 0, json.dumps(value, sort_keys=True))


@dataclass(frozen=True)
class Omission:
    """Why a derived indicator was not emitted."""

    participant: str
    name: str
    start: int
    end: int
    reason: str

    def to_row(self) -> dict:
        return {"pid": self.participant, "name": self.name, "window": [self.start, self.end],
                "omitted": self.reason}


_ENCODER = json.JSONEncoder(separators=(",", ":"), sort_keys=True)


def dumps(row: dict) -> str:
    return _ENCODER.encode(row)


def write_values(values, path) -> int:
    """Write values (or omissions) as JSONL; returns the number of rows."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for v in values:
            fh.write(dumps(v.to_row()))
            fh.write("\n")
            n += 1
    return n


def read_values(path, names=None):
    """Iterate values from a JSONL file, optionally only the given names."""
    wanted = set(names) if names is not None else None
    with open(Path(path), encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            if "omitted" in row:
                continue
            if wanted is None or row["name"] in wanted:
                yield IndicatorValue.from_row(row)
