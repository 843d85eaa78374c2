"""The central tuple store.

A tuple ``(u, g, t, name, value)`` holds one indicator value of
participant ``u`` keyed by a geocell ``g`` and a time key ``t`` at the
indicator's granularity. In *habits* mode ``g`` is the participant's home
cell; in *resources* mode it is the cell where the value was observed.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import date
from pathlib import Path

from ..geocell import validate_code
from ..indicators.catalog import IndicatorCatalog
from ..timeutil import day_key, local_date, minute_key, week_key

log = logging.getLogger(__name__)

MODES = ("habits", "resources")
PARTITION_LEN = 4


@dataclass(frozen=True)
class IndicatorTuple:
    u: str
    g: str
    t: str
    name: str
    value: object
    quality: float = 1.0
    mode: str = "resources"
    ts: int = 0  # window start, epoch ms
    span_ms: int = 0  # window length; recorded time behind the value

    def to_row(self) -> dict:
        return {"u": self.u, "g": self.g, "t": self.t, "name": self.name, "value": self.value,
                "quality": self.quality, "mode": self.mode, "ts": self.ts, "span_ms": self.span_ms}

    @classmethod
    def from_row(cls, r: dict) -> "IndicatorTuple":
        return cls(r["u"], r["g"], r["t"], r["name"], r["value"], float(r.get("quality", 1.0)),
                   r.get("mode", "resources"), int(r.get("ts", 0)), int(r.get("span_ms", 0)))


def time_key(start: int, end: int, granularity: str, tz: str) -> str:
    if granularity == "minute":
        return minute_key(start, tz)
    if granularity == "day":
        return day_key(local_date(start, tz))
    if granularity == "week":
        return week_key(local_date(start, tz))
    first: date = local_date(start, tz)
    last: date = local_date(max(start, end - 1), tz)
    return f"{day_key(first)}/{day_key(last)}"


def build_tuples(values, catalog: IndicatorCatalog, mode: str, tz: str, homes: dict | None = None,
                 names=None) -> list[IndicatorTuple]:
    """Tuples for indicator values in the given mode.

    Values lacking a location for the mode (no home cell, or no observed
    cell in resources mode) are skipped and counted in the log.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    wanted = set(names) if names is not None else None
    out = []
    skipped = 0
    for v in values:
        if wanted is not None and v.name not in wanted:
            continue
        spec = catalog[v.name]
        g = (homes or {}).get(v.participant) if mode == "habits" else v.cell
        if not g:
            skipped += 1
            continue
        out.append(IndicatorTuple(v.participant, g, time_key(v.start, v.end, spec.granularity, tz), v.name,
                                  v.value, v.quality, mode, v.start, v.end - v.start))
    if skipped:
        log.info("%d values without a %s cell skipped", skipped, mode)
    return out


def _sort_key(tp: IndicatorTuple):
    return (tp.g, tp.u, tp.ts, tp.t, json.dumps(tp.value, sort_keys=True), tp.quality, tp.span_ms)


class TupleStore:
    """Tuples persisted as JSONL partitioned by indicator, mode and cell prefix:
    ``<root>/<name>/<mode>/<prefix>.jsonl``."""

    def __init__(self, root):
        self.root = Path(root)

    def write(self, tuples) -> list[Path]:
        parts: dict[tuple, list] = {}
        for tp in tuples:
            validate_code(tp.g)
            parts.setdefault((tp.name, tp.mode, tp.g[:PARTITION_LEN]), []).append(tp)
        paths = []
        for (name, mode, prefix), rows in sorted(parts.items()):
            p = self.root / name / mode / f"{prefix}.jsonl"
            p.parent.mkdir(parents=True, exist_ok=True)
            with open(p, "w", encoding="utf-8") as fh:
                for tp in sorted(rows, key=_sort_key):
                    fh.write(json.dumps(tp.to_row(), sort_keys=True, separators=(",", ":")))
                    fh.write("\n")
            paths.append(p)
        return paths

    def indicators(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())

    def read(self, name: str, mode: str, prefix: str = "") -> list[IndicatorTuple]:
        d = self.root / name / mode
        if not d.exists():
            return []
        out = []
        for p in sorted(d.glob("*.jsonl")):
            part = p.stem
            if prefix and not (part.startswith(prefix) or prefix.startswith(part)):
                continue
            with open(p, encoding="utf-8") as fh:
                for line in fh:
                    tp = IndicatorTuple.from_row(json.loads(line))
                    if tp.g.startswith(prefix):
                        out.append(tp)
        return out
