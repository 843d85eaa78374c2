"""Behavior profiles: first-order transition graphs over POI types.

A profile keeps only POI types, counts and summary moments. Coordinates
from the timelines never reach it.
"""
from __future__ import annotations

import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from ..timeutil import MS_PER_MIN
from .types import DAY_TYPES, TRANSPORT_MODES, Timeline

MOVE_VARIABLES = ("distance_m", "duration_min", "steps", "mvpa_minutes")
STOP_VARIABLES = ("duration_min", "meals", "fast_food_meals", "mvpa_minutes", "steps")


def summarize(values) -> dict:
    """(mean, std, count) of a sample; population std, zero for one value."""
    values = [float(v) for v in values]
    n = len(values)
    if n == 0:
        return {"mean": None, "std": None, "count": 0}
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return {"mean": mean, "std": math.sqrt(var), "count": n}


@dataclass
class BehaviorProfile:
    participant: str
    day_type: str
    n_days: int = 0
    transition_counts: dict = field(default_factory=dict)
    transition_matrix: dict = field(default_factory=dict)
    transition_metadata: dict = field(default_factory=dict)
    poi_metadata: dict = field(default_factory=dict)

    @property
    def nodes(self) -> list[str]:
        names = set(self.poi_metadata)
        for i, row in self.transition_matrix.items():
            names.add(i)
            names.update(row)
        return sorted(names)

    def edges(self) -> list[tuple[str, str, float]]:
        return [(i, j, p) for i in sorted(self.transition_matrix)
                for j, p in sorted(self.transition_matrix[i].items()) if p > 0]

    def to_dict(self) -> dict:
        return {
            "participant": self.participant,
            "day_type": self.day_type,
            "n_days": self.n_days,
            "nodes": self.nodes,
            "transition_counts": {i: dict(sorted(r.items())) for i, r in sorted(self.transition_counts.items())},
            "transition_matrix": {i: dict(sorted(r.items())) for i, r in sorted(self.transition_matrix.items())},
            "transition_metadata": {f"{i}->{j}": self.transition_metadata[(i, j)]
                                    for i, j, _ in self.edges()},
            "poi_metadata": dict(sorted(self.poi_metadata.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BehaviorProfile":
        meta = {}
        for key, v in d.get("transition_metadata", {}).items():
            i, j = key.split("->", 1)
            meta[(i, j)] = v
        return cls(d["participant"], d["day_type"], d.get("n_days", 0),
                   {i: dict(r) for i, r in d.get("transition_counts", {}).items()},
                   {i: dict(r) for i, r in d.get("transition_matrix", {}).items()},
                   meta, dict(d.get("poi_metadata", {})))


def build_profile(timelines, day_type: str, participant: str | None = None) -> BehaviorProfile:
    """Empirical transition probabilities and per-edge/per-node summaries.

    P_ij is the number of i -> j moves over the number of moves leaving i,
    with no smoothing. Self-transitions (e.g. home -> home) are kept.
    """
    if day_type not in DAY_TYPES:
        raise ValueError(f"unknown day type {day_type!r}")
    days = [tl for tl in timelines if tl.day_type == day_type]
    if not days:
        raise ValueError(f"no {day_type} timelines")
    pids = {tl.participant for tl in days}
    if participant is None:
        if len(pids) > 1:
            raise ValueError("timelines from several participants; pass participant explicitly")
        participant = next(iter(pids))

    counts: dict[str, Counter] = defaultdict(Counter)
    move_values = defaultdict(lambda: defaultdict(lambda: defaultdict(list)))
    modes = defaultdict(Counter)
    stop_values = defaultdict(lambda: defaultdict(list))
    for tl in sorted(days, key=lambda x: (x.date, x.participant)):
        for e in tl.events:
            if e.kind == "move":
                key = (e.origin_poi, e.dest_poi)
                counts[e.origin_poi][e.dest_poi] += 1
                modes[key][e.transport_mode] += 1
                vals = move_values[key][e.transport_mode]
                vals["distance_m"].append(e.distance_m)
                vals["duration_min"].append(e.duration_ms / MS_PER_MIN)
                for name in ("steps", "mvpa_minutes"):
                    if name in e.indicators:
                        vals[name].append(e.indicators[name])
            elif not e.gap:
                vals = stop_values[e.poi_type]
                vals["duration_min"].append(e.duration_ms / MS_PER_MIN)
                for name in STOP_VARIABLES[1:]:
                    if name in e.indicators:
                        vals[name].append(e.indicators[name])

    matrix = {}
    for i, row in counts.items():
        total = sum(row.values())
        matrix[i] = {j: c / total for j, c in row.items()}

    meta = {}
    for key, mode_counts in modes.items():
        n = sum(mode_counts.values())
        meta[key] = {
            "count": n,
            "mode_pmf": {m: mode_counts[m] / n for m in TRANSPORT_MODES if mode_counts[m]},
            "by_mode": {m: {v: summarize(move_values[key][m][v]) for v in MOVE_VARIABLES}
                        for m in TRANSPORT_MODES if mode_counts[m]},
        }
    poi_meta = {}
    for poi, vals in stop_values.items():
        poi_meta[poi] = {"visits": len(vals["duration_min"])}
        poi_meta[poi].update({v: summarize(vals[v]) for v in STOP_VARIABLES})
    return BehaviorProfile(participant, day_type, len({tl.date for tl in days}),
                           {i: dict(r) for i, r in counts.items()}, matrix, meta, poi_meta)


def _quote(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def profile_to_dot(profile: BehaviorProfile) -> str:
    """Graph description in dot syntax; nodes and edges sorted by name."""
    lines = ["digraph behavior_profile {"]
    for node in profile.nodes:
        lines.append(f"  {_quote(node)};")
    for i, j, p in profile.edges():
        lines.append(f'  {_quote(i)} -> {_quote(j)} [label="{p:.2f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


_NAME = r'"((?:[^"\\]|\\.)*)"'
_EDGE_RE = re.compile(rf'^\s*{_NAME}\s*->\s*{_NAME}\s*\[label="([0-9.]+)"\];\s*$')
_NODE_RE = re.compile(rf"^\s*{_NAME};\s*$")


def _unquote(s: str) -> str:
    return re.sub(r"\\(.)", r"\1", s)


def parse_dot(text: str) -> tuple[list[str], list[tuple[str, str, float]]]:
    """Nodes and labelled edges of a document written by `profile_to_dot`."""
    nodes, edges = [], []
    for line in text.splitlines():
        m = _EDGE_RE.match(line)
        if m:
            edges.append((_unquote(m.group(1)), _unquote(m.group(2)), float(m.group(3))))
            continue
        m = _NODE_RE.match(line)
        if m:
            nodes.append(_unquote(m.group(1)))
    return nodes, edges


def profiles_for(timelines: list[Timeline]) -> list[BehaviorProfile]:
    """One profile per (participant, day type) present in the timelines."""
    keys = sorted({(tl.participant, tl.day_type) for tl in timelines})
    return [build_profile([tl for tl in timelines if tl.participant == pid], dt, pid) for pid, dt in keys]
