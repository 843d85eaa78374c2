"""Data-quality scores on the five-level scale and their fuzzy combination.

Scores live in [0, 1] with the named anchors very low 0.2, low 0.4,
moderate 0.6, high 0.8 and very high 1.0. Availability is mapped onto the
scale by linear interpolation between a very-low and a very-high
threshold; several error sources are combined with a t-norm (all sources
must be good) or a t-conorm (any one good source suffices).
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from functools import reduce

log = logging.getLogger(__name__)

LEVELS = {"very_low": 0.2, "low": 0.4, "moderate": 0.6, "high": 0.8, "very_high": 1.0}
DEFAULT_INDICATOR_ACCURACY = 0.8


class QualityError(ValueError):
    pass


@dataclass(frozen=True)
class QualityScore:
    value: float
    provenance: tuple = ()

    def __post_init__(self):
        if not (isinstance(self.value, (int, float)) and 0.0 <= self.value <= 1.0):
            raise QualityError(f"quality {self.value!r} outside [0, 1]")

    def __float__(self) -> float:
        return float(self.value)

    def level(self) -> str:
        """Name of the closest anchor level."""
        return min(LEVELS, key=lambda k: (abs(LEVELS[k] - self.value), -LEVELS[k]))

    def to_dict(self) -> dict:
        return {"value": self.value, "provenance": [list(p) for p in self.provenance]}


def _v(x) -> float:
    v = float(x)
    if not 0.0 <= v <= 1.0 or math.isnan(v):
        raise QualityError(f"quality {x!r} outside [0, 1]")
    return v


@dataclass(frozen=True)
class AvailabilityThresholds:
    very_low: float
    very_high: float
    unit: str = ""

    def __post_init__(self):
        if not self.very_low < self.very_high:
            raise QualityError("very_low threshold must be below very_high")


DEFAULT_THRESHOLDS = {
    "accel_hours_per_day": AvailabilityThresholds(1.0, 6.0, "h"),
    "gps_hours_per_day": AvailabilityThresholds(1.0, 6.0, "h"),
    "hours_per_region": AvailabilityThresholds(10.0, 100.0, "h"),
    "users_per_region": AvailabilityThresholds(10.0, 100.0, "users"),
}


def availability_quality(value: float, thresholds: AvailabilityThresholds | str) -> QualityScore:
    """0.2 at or below the very-low threshold, 1.0 at or above the very-high
    one, linear in between."""
    th = DEFAULT_THRESHOLDS[thresholds] if isinstance(thresholds, str) else thresholds
    value = float(value)
    if math.isnan(value) or value < 0:
        raise QualityError(f"availability must be nonnegative, got {value!r}")
    if value <= th.very_low:
        q = LEVELS["very_low"]
    elif value >= th.very_high:
        q = LEVELS["very_high"]
    else:
        q = 0.2 + 0.8 * (value - th.very_low) / (th.very_high - th.very_low)
    return QualityScore(q, (("availability", value),))


DEFAULT_SOURCES = {
    "smartwatch": 1.0,
    "smartphone": 0.8,
    "official_statistics": 1.0,
    "foursquare": 1.0,
    "gmaps": 0.6,
    "osm": 0.8,
}
UNKNOWN_SOURCE_QUALITY = 0.6


def source_quality(source: str, table: dict | None = None) -> QualityScore:
    t = DEFAULT_SOURCES if table is None else table
    if source not in t:
        log.warning("unknown data source %r, using quality %.1f", source, UNKNOWN_SOURCE_QUALITY)
        return QualityScore(UNKNOWN_SOURCE_QUALITY, (("source", source),))
    return QualityScore(_v(t[source]), (("source", source),))


T_NORMS = {
    "min": min,
    "product": lambda a, b: a * b,
    "lukasiewicz": lambda a, b: max(0.0, a + b - 1.0),
}
T_CONORMS = {
    "max": max,
    "probabilistic_sum": lambda a, b: a + b - a * b,
    "bounded_sum": lambda a, b: min(1.0, a + b),
}


def _provenance(*scores) -> tuple:
    out = []
    for s in scores:
        if isinstance(s, QualityScore):
            out.extend(s.provenance)
    return tuple(out)


def combine_intersect(m1, m2, norm: str = "min") -> QualityScore:
    """t-norm of two scores; the default is the standard intersection."""
    try:
        op = T_NORMS[norm]
    except KeyError:
        raise QualityError(f"unknown t-norm {norm!r}; choose from {sorted(T_NORMS)}") from None
    return QualityScore(op(_v(m1), _v(m2)), _provenance(m1, m2))


def combine_union(m1, m2, conorm: str = "max") -> QualityScore:
    """t-conorm of two scores; the default is the standard union."""
    try:
        op = T_CONORMS[conorm]
    except KeyError:
        raise QualityError(f"unknown t-conorm {conorm!r}; choose from {sorted(T_CONORMS)}") from None
    return QualityScore(op(_v(m1), _v(m2)), _provenance(m1, m2))


def intersect_all(scores, norm: str = "min") -> QualityScore:
    scores = list(scores)
    if not scores:
        return QualityScore(1.0)  # neutral element of every t-norm
    return reduce(lambda a, b: combine_intersect(a, b, norm), scores[1:],
                  scores[0] if isinstance(scores[0], QualityScore) else QualityScore(_v(scores[0])))


def union_all(scores, conorm: str = "max") -> QualityScore:
    scores = list(scores)
    if not scores:
        return QualityScore(0.0)  # neutral element of every t-conorm
    return reduce(lambda a, b: combine_union(a, b, conorm), scores[1:],
                  scores[0] if isinstance(scores[0], QualityScore) else QualityScore(_v(scores[0])))


@dataclass
class QualityConfig:
    thresholds: dict = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    sources: dict = field(default_factory=lambda: dict(DEFAULT_SOURCES))
    norm: str = "min"
    conorm: str = "max"
    indicator_accuracy: dict = field(default_factory=dict)

    def accuracy(self, indicator: str) -> float:
        return _v(self.indicator_accuracy.get(indicator, DEFAULT_INDICATOR_ACCURACY))

    @classmethod
    def from_dict(cls, d: dict | None) -> "QualityConfig":
        d = d or {}
        th = dict(DEFAULT_THRESHOLDS)
        for k, v in d.get("thresholds", {}).items():
            th[k] = AvailabilityThresholds(float(v["very_low"]), float(v["very_high"]), v.get("unit", ""))
        src = dict(DEFAULT_SOURCES)
        src.update({k: _v(v) for k, v in d.get("sources", {}).items()})
        cfg = cls(th, src, d.get("norm", "min"), d.get("conorm", "max"), dict(d.get("indicator_accuracy", {})))
        if cfg.norm not in T_NORMS:
            raise QualityError(f"unknown t-norm {cfg.norm!r}")
        if cfg.conorm not in T_CONORMS:
            raise QualityError(f"unknown t-conorm {cfg.conorm!r}")
        return cfg


REPORT_COLUMNS = ("scope", "key", "day", "accel_hours", "gps_hours", "availability_quality",
                  "source", "source_quality", "indicator_accuracy", "combined")


def _row_quality(row: dict, cfg: QualityConfig) -> dict:
    qa = availability_quality(row["accel_hours"], cfg.thresholds["accel_hours_per_day"])
    qg = availability_quality(row["gps_hours"], cfg.thresholds["gps_hours_per_day"])
    avail = combine_intersect(qa, qg, cfg.norm)
    src = source_quality(row["source"], cfg.sources)
    acc = cfg.accuracy(row.get("indicator", "default"))
    combined = intersect_all([avail, src, acc], cfg.norm)
    return {
        "availability_quality": round(avail.value, 6),
        "source_quality": round(src.value, 6),
        "indicator_accuracy": round(acc, 6),
        "combined": round(combined.value, 6),
    }


def quality_report(dataset: dict, cfg: QualityConfig | None = None) -> dict:
    """Tabulate availability, source and accuracy scores and their combination.

    ``dataset`` holds ``"days"``: rows ``{key, day, accel_hours, gps_hours,
    source}`` (key being a participant or any other grouping) and optionally
    ``"regions"``: rows ``{key, users, hours}``. Returns ``{"rows": [...],
    "regions": [...]}`` sorted deterministically.
    """
    cfg = cfg or QualityConfig()
    rows = []
    for r in sorted(dataset.get("days", []), key=lambda r: (r["key"], r["day"])):
        out = {"scope": "day", "key": r["key"], "day": r["day"],
               "accel_hours": round(float(r["accel_hours"]), 6),
               "gps_hours": round(float(r["gps_hours"]), 6), "source": r["source"]}
        out.update(_row_quality(r, cfg))
        rows.append(out)
    regions = []
    for r in sorted(dataset.get("regions", []), key=lambda r: r["key"]):
        qu = availability_quality(r["users"], cfg.thresholds["users_per_region"])
        qh = availability_quality(r["hours"], cfg.thresholds["hours_per_region"])
        regions.append({"scope": "region", "key": r["key"], "users": int(r["users"]),
                        "hours": round(float(r["hours"]), 6),
                        "users_quality": round(qu.value, 6), "hours_quality": round(qh.value, 6),
                        "combined": round(combine_intersect(qu, qh, cfg.norm).value, 6)})
    return {"rows": rows, "regions": regions}


def report_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def report_to_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=1) + "\n"
