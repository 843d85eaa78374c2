"""Registry of behavioral indicators.

Each entry declares its kind (self-reported, base or derived), units, value
domain and the granularity of its time key. Derived indicators list the
indicator ids they are computed from.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from ..ingest.records import MEAL_TYPES
from ..mobility.types import TRANSPORT_MODES
from .activity import INTENSITY_CLASSES

KINDS = ("self_reported", "base", "derived")
GRANULARITIES = ("minute", "day", "week", "window")
# value domains: "real", "count" (nonnegative integer), "pmf" (categorical distribution),
# a tuple of allowed categories, or None for free-form text


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class IndicatorSpec:
    id: str
    kind: str
    units: str
    domain: object
    granularity: str
    inputs: tuple = ()
    description: str = ""
    categories: tuple = ()  # support of pmf-valued indicators

    @property
    def numeric(self) -> bool:
        return self.domain in ("real", "count")

    @property
    def categorical(self) -> bool:
        return isinstance(self.domain, tuple)

    def check(self, value) -> None:
        """Raise CatalogError unless ``value`` lies in the declared domain."""
        if self.domain in ("real", "count"):
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise CatalogError(f"{self.id}: value {value!r} is not a finite number")
            if self.domain == "count" and (value < 0 or value != int(value)):
                raise CatalogError(f"{self.id}: value {value!r} is not a count")
        elif self.domain == "pmf":
            if not isinstance(value, dict) or not value:
                raise CatalogError(f"{self.id}: value must be a nonempty category->probability map")
            if self.categories and set(value) - set(self.categories):
                raise CatalogError(f"{self.id}: unknown categories {sorted(set(value) - set(self.categories))}")
            if any(not (0.0 <= p <= 1.0) for p in value.values()) or abs(sum(value.values()) - 1.0) > 1e-9:
                raise CatalogError(f"{self.id}: not a probability mass function")
        elif isinstance(self.domain, tuple):
            if value not in self.domain:
                raise CatalogError(f"{self.id}: {value!r} not in {self.domain}")
        elif not isinstance(value, str):
            raise CatalogError(f"{self.id}: expected a string")

    def to_dict(self) -> dict:
        d = {"id": self.id, "kind": self.kind, "units": self.units,
             "domain": list(self.domain) if isinstance(self.domain, tuple) else self.domain,
             "granularity": self.granularity, "inputs": list(self.inputs),
             "description": self.description}
        if self.categories:
            d["categories"] = list(self.categories)
        return d


def _defaults() -> list[IndicatorSpec]:
    S, B, D = KINDS
    specs = [
        IndicatorSpec("meal", S, "event", MEAL_TYPES, "minute", description="reported meal and its type"),
        IndicatorSpec("food_category", S, "event", None, "minute",
                      description="reported food category of a meal"),
        IndicatorSpec("activity_counts", B, "counts/min", "count", "minute"),
        IndicatorSpec("activity_intensity", B, "class", INTENSITY_CLASSES, "minute"),
        IndicatorSpec("met", B, "MET", "real", "minute", description="energy expenditure estimate"),
        IndicatorSpec("steps", B, "steps/min", "count", "minute"),
        IndicatorSpec("transport_mode", B, "mode", TRANSPORT_MODES, "minute",
                      description="mode of a move, keyed at its start minute"),
        IndicatorSpec("daily_steps", B, "steps/day", "count", "day", ("steps",)),
        IndicatorSpec("sleep_hours", B, "h/night", "real", "day", description="keyed by the night's date"),
        IndicatorSpec("sleep_interruptions", B, "count/night", "count", "day"),
        IndicatorSpec("fast_food_per_week", D, "times/week", "real", "window", ("food_category",)),
    ]
    for m in MEAL_TYPES:
        specs.append(IndicatorSpec(f"{m}_per_week", D, "times/week", "real", "window", ("meal",)))
    specs += [
        IndicatorSpec("active_commute_minutes", D, "min/day", "real", "day", ("transport_mode",),
                      "walking or cycling time on moves ending at school, per school day"),
        IndicatorSpec("sedentary_after_school_minutes", D, "min/day", "real", "day",
                      ("activity_intensity",), "sedentary minutes from school end to 22:00, per school day"),
        IndicatorSpec("activity_at_school", D, "pmf", "pmf", "window", ("activity_intensity",),
                      categories=INTENSITY_CLASSES),
        IndicatorSpec("activity_after_school", D, "pmf", "pmf", "window", ("activity_intensity",),
                      categories=INTENSITY_CLASSES),
        IndicatorSpec("avg_sleep_hours", D, "h/night", "real", "window", ("sleep_hours",)),
        IndicatorSpec("avg_sleep_interruptions", D, "count/night", "real", "window", ("sleep_interruptions",)),
        IndicatorSpec("eating_schedule_sd", D, "min", "real", "window", ("meal",),
                      "std-dev of meal clock times, averaged over meal types"),
    ]
    return specs


@dataclass
class IndicatorCatalog:
    specs: dict = field(default_factory=dict)

    def __post_init__(self):
        for s in self.specs.values():
            _validate_spec(s)
        for s in self.specs.values():
            missing = [i for i in s.inputs if i not in self.specs]
            if missing:
                raise CatalogError(f"{s.id}: unknown inputs {missing}")

    @classmethod
    def default(cls, overrides: dict | None = None) -> "IndicatorCatalog":
        specs = {}
        for s in _defaults():
            if s.id in specs:
                raise CatalogError(f"duplicate indicator id {s.id!r}")
            specs[s.id] = s
        for key, fields in (overrides or {}).items():
            if key not in specs:
                raise CatalogError(f"override for unknown indicator {key!r}")
            allowed = {"units", "granularity", "description"}
            bad = set(fields) - allowed
            if bad:
                raise CatalogError(f"cannot override {sorted(bad)} of {key!r}")
            specs[key] = replace(specs[key], **fields)
        return cls(specs)

    @property
    def ids(self) -> list[str]:
        return sorted(self.specs)

    def __contains__(self, name) -> bool:
        return name in self.specs

    def __getitem__(self, name) -> IndicatorSpec:
        try:
            return self.specs[name]
        except KeyError:
            raise CatalogError(f"unknown indicator {name!r}; known ids: {', '.join(self.ids)}") from None

    def check(self, name: str, value) -> None:
        self[name].check(value)

    def to_dict(self) -> dict:
        return {i: self.specs[i].to_dict() for i in self.ids}


def _validate_spec(s: IndicatorSpec) -> None:
    if s.kind not in KINDS:
        raise CatalogError(f"{s.id}: unknown kind {s.kind!r}")
    if s.granularity not in GRANULARITIES:
        raise CatalogError(f"{s.id}: unknown granularity {s.granularity!r}")
    if s.kind == "derived" and not s.inputs:
        raise CatalogError(f"{s.id}: derived indicators must declare inputs")
