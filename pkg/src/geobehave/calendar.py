"""School calendars: which dates are school days and the school hours."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date


@dataclass(frozen=True)
class SchoolCalendar:
    id: str = "default"
    school_start: str = "08:00"
    school_end: str = "14:00"
    school_days: frozenset = field(default_factory=frozenset)

    def day_type(self, d: date) -> str:
        return "school" if d.isoformat() in self.school_days else "non_school"

    def to_dict(self) -> dict:
        return {"id": self.id, "school_start": self.school_start, "school_end": self.school_end,
                "school_days": sorted(self.school_days)}

    @classmethod
    def from_dict(cls, d: dict) -> "SchoolCalendar":
        return cls(d.get("id", "default"), d.get("school_start", "08:00"), d.get("school_end", "14:00"),
                   frozenset(d.get("school_days", [])))

    @classmethod
    def load(cls, path) -> "SchoolCalendar":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
