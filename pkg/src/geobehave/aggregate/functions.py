"""Aggregation functions over indicator tuples and the privacy gate.

f1  mean over participants of each participant's own mean
f2  mean over all tuples (participants weighted by how much they contributed)
f3  distribution (pmf) of participants' means or categorical values
f4  share of participants whose mean is at or below a threshold

All four select the tuples whose cell starts with the requested cell and
that pass an optional filter, and are invariant to tuple order.
"""
from __future__ import annotations

import math
from bisect import bisect_left
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..geocell import validate_code
from ..quality import QualityConfig, availability_quality, intersect_all
from ..timeutil import MS_PER_HOUR
from .tuples import IndicatorTuple

FUNCTIONS = ("f1", "f2", "f3", "f4")
DEFAULT_K_MIN = 10
DEFAULT_CELL_LEN = 6
DEFAULT_MIN_LEN = 4


class AggregationError(ValueError):
    pass


# --- filters -----------------------------------------------------------------

@dataclass(frozen=True)
class Filter:
    """A pure predicate on tuples; combine with ``&``."""

    pred: Callable[[IndicatorTuple], bool]
    label: str = "all"

    def __call__(self, tp: IndicatorTuple) -> bool:
        return self.pred(tp)

    def __and__(self, other: "Filter") -> "Filter":
        a, b = self.pred, other.pred
        return Filter(lambda tp: a(tp) and b(tp), f"({self.label} & {other.label})")


ALL = Filter(lambda tp: True)


def by_attribute(attrs: dict, key: str, allowed) -> Filter:
    """Participants whose attribute (e.g. age band, gender) is in ``allowed``;
    ``attrs`` maps participant id -> attribute dict."""
    allowed = frozenset(allowed)
    return Filter(lambda tp: attrs.get(tp.u, {}).get(key) in allowed, f"{key} in {sorted(allowed)}")


def by_day_type(day_types: dict, allowed) -> Filter:
    """Tuples whose time key's date (``YYYYMMDD`` prefix) has a matching day type.

    ``day_types`` maps ``YYYYMMDD`` -> ``school`` / ``non_school``.
    """
    allowed = frozenset(allowed)
    return Filter(lambda tp: day_types.get(tp.t[:8]) in allowed, f"day_type in {sorted(allowed)}")


def by_time(start_ms: int, end_ms: int) -> Filter:
    return Filter(lambda tp: start_ms <= tp.ts < end_ms, f"time in [{start_ms}, {end_ms})")


def by_participants(pids) -> Filter:
    """Restrict to a participant set, e.g. one selected by a condition on
    another indicator (see :func:`users_where`)."""
    pids = frozenset(pids)
    return Filter(lambda tp: tp.u in pids, "participant condition")


def users_where(tuples, condition: Callable[[float], bool]) -> set:
    """Participants whose mean of a numeric indicator satisfies ``condition``."""
    return {u for u, m in user_means(tuples).items() if condition(m)}


# --- results -----------------------------------------------------------------

@dataclass
class AggregateResult:
    cell: str
    function: str
    indicator: str
    window: tuple = ()
    value: object = None
    labels: list = field(default_factory=list)
    n_participants: int = 0
    n_tuples: int = 0
    quality: float | None = None
    suppressed: bool = False
    reason: str = ""
    clamped: int = 0
    requested: str = ""

    def to_dict(self) -> dict:
        d = {"cell": self.cell, "function": self.function, "indicator": self.indicator,
             "window": list(self.window), "suppressed": self.suppressed}
        if self.requested:
            d["requested"] = self.requested
        if self.suppressed:
            d["reason"] = self.reason
            return d
        d.update({"value": self.value, "n_participants": self.n_participants,
                  "n_tuples": self.n_tuples, "quality": self.quality})
        if self.labels:
            d["labels"] = self.labels
        if self.clamped:
            d["clamped"] = self.clamped
        return d


def select(tuples, cell: str, flt: Filter | None = None, min_quality: float | None = None) -> list:
    flt = flt or ALL
    out = [tp for tp in tuples if tp.g.startswith(cell) and flt(tp)]
    if min_quality is not None:
        out = [tp for tp in out if tp.quality >= min_quality]
    return out


def _by_user(tuples) -> dict:
    groups = defaultdict(list)
    for tp in tuples:
        groups[tp.u].append(tp)
    return groups


def _numeric(tp) -> float:
    v = tp.value
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise AggregationError(f"{tp.name}: non-numeric value {v!r}")
    return float(v)


def _mean(values, weights=None) -> float:
    if weights is None:
        return math.fsum(values) / len(values)
    tw = math.fsum(weights)
    if tw <= 0:
        return math.fsum(values) / len(values)
    return math.fsum(w * v for v, w in zip(values, weights)) / tw


def user_means(tuples, weighted: bool = False) -> dict:
    """Each participant's (optionally quality-weighted) time mean."""
    out = {}
    for u, rows in _by_user(tuples).items():
        vals = [_numeric(tp) for tp in rows]
        out[u] = _mean(vals, [tp.quality for tp in rows] if weighted else None)
    return out


def aggregate_quality(tuples, cfg: QualityConfig | None = None) -> float:
    """Minimum of user-count availability, recorded hours and mean tuple quality."""
    cfg = cfg or QualityConfig()
    users = len({tp.u for tp in tuples})
    hours = sum(tp.span_ms for tp in tuples) / MS_PER_HOUR
    qs = [tp.quality for tp in tuples]
    mean_q = math.fsum(qs) / len(qs) if qs else 0.0
    q = intersect_all([availability_quality(users, cfg.thresholds["users_per_region"]),
                       availability_quality(hours, cfg.thresholds["hours_per_region"]),
                       mean_q], "min")
    return round(q.value, 6)


def _window(tuples) -> tuple:
    keys = sorted(tp.t for tp in tuples)
    return (keys[0], keys[-1]) if keys else ()


def _check_single_indicator(tuples) -> str:
    names = {tp.name for tp in tuples}
    if len(names) > 1:
        raise AggregationError(f"tuples mix indicators {sorted(names)}")
    return names.pop() if names else ""


def _result(fn, cell, tuples, value, cfg, labels=None, clamped=0) -> AggregateResult:
    return AggregateResult(cell, fn, _check_single_indicator(tuples), _window(tuples), value, labels or [],
                           len({tp.u for tp in tuples}), len(tuples), aggregate_quality(tuples, cfg),
                           clamped=clamped)


def _empty(fn, cell) -> AggregateResult:
    return AggregateResult(cell, fn, "", suppressed=True, reason="empty")


def _prepare(tuples, cell, flt, weighting, gate):
    if weighting not in (None, "weighted", "gated"):
        raise AggregationError(f"unknown weighting {weighting!r}")
    return select(tuples, cell, flt, gate if weighting == "gated" else None)


def f1_avg_over_individuals(tuples, cell: str, flt: Filter | None = None, weighting: str | None = None,
                            gate: float = 0.6, cfg: QualityConfig | None = None) -> AggregateResult:
    sel = _prepare(tuples, cell, flt, weighting, gate)
    if not sel:
        return _empty("f1", cell)
    means = user_means(sel, weighted=weighting == "weighted")
    return _result("f1", cell, sel, _mean([means[u] for u in sorted(means)]), cfg)


def f2_weighted_avg(tuples, cell: str, flt: Filter | None = None, weighting: str | None = None,
                    gate: float = 0.6, cfg: QualityConfig | None = None) -> AggregateResult:
    sel = _prepare(tuples, cell, flt, weighting, gate)
    if not sel:
        return _empty("f2", cell)
    sel_sorted = sorted(sel, key=lambda tp: (tp.u, tp.ts, tp.t, _numeric(tp)))
    vals = [_numeric(tp) for tp in sel_sorted]
    w = [tp.quality for tp in sel_sorted] if weighting == "weighted" else None
    return _result("f2", cell, sel, _mean(vals, w), cfg)


def _bin_index(x: float, edges) -> tuple[int, bool]:
    """Bin of ``x`` for half-open bins [e_k, e_k+1), last bin closed; values
    outside the range clamp to the edge bins."""
    m = len(edges) - 1
    if x < edges[0]:
        return 0, True
    if x > edges[-1]:
        return m - 1, True
    k = int(np.searchsorted(edges, x, side="right")) - 1
    return min(k, m - 1), False


def f3_distribution(tuples, cell: str, flt: Filter | None = None, bins=None, categories=None,
                    weighting: str | None = None, gate: float = 0.6,
                    cfg: QualityConfig | None = None) -> AggregateResult:
    """PMF across participants.

    With ``bins`` (M+1 increasing edges) each participant's mean falls in one
    of M bins. Otherwise values are categorical (or pmf-valued): each
    participant contributes their own distribution over ``categories`` and
    the result is the average of those, so every participant weighs the same.
    """
    sel = _prepare(tuples, cell, flt, weighting, gate)
    if not sel:
        return _empty("f3", cell)
    if bins is not None:
        edges = [float(e) for e in bins]
        if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
            raise AggregationError("bins must be at least two strictly increasing edges")
        means = user_means(sel, weighted=weighting == "weighted")
        counts = [0] * (len(edges) - 1)
        clamped = 0
        for u in sorted(means):
            k, c = _bin_index(means[u], edges)
            counts[k] += 1
            clamped += c
        n = len(means)
        labels = [f"[{a:g},{b:g})" for a, b in zip(edges, edges[1:])]
        labels[-1] = labels[-1][:-1] + "]"
        return _result("f3", cell, sel, [c / n for c in counts], cfg, labels, clamped)

    per_user = {}
    seen = set()
    for u, rows in _by_user(sel).items():
        acc = defaultdict(float)
        for tp in rows:
            if isinstance(tp.value, dict):
                for k, p in tp.value.items():
                    acc[k] += float(p)
            else:
                acc[str(tp.value)] += 1.0
        total = math.fsum(acc.values())
        per_user[u] = {k: v / total for k, v in acc.items()}
        seen.update(acc)
    cats = list(categories) if categories is not None else sorted(seen)
    unknown = seen - set(cats)
    if unknown:
        raise AggregationError(f"values outside the declared categories: {sorted(unknown)}")
    users = sorted(per_user)
    pmf = [math.fsum(per_user[u].get(c, 0.0) for u in users) / len(users) for c in cats]
    return _result("f3", cell, sel, pmf, cfg, cats)


def f4_fraction_below(tuples, cell: str, threshold: float, flt: Filter | None = None, strict: bool = False,
                      weighting: str | None = None, gate: float = 0.6,
                      cfg: QualityConfig | None = None) -> AggregateResult:
    sel = _prepare(tuples, cell, flt, weighting, gate)
    if not sel:
        return _empty("f4", cell)
    means = user_means(sel, weighted=weighting == "weighted")
    below = sum(1 for m in means.values() if (m < threshold if strict else m <= threshold))
    return _result("f4", cell, sel, below / len(means), cfg)


def run_function(fn: str, tuples, cell: str, flt: Filter | None = None, **kw) -> AggregateResult:
    if fn == "f1":
        return f1_avg_over_individuals(tuples, cell, flt, **kw)
    if fn == "f2":
        return f2_weighted_avg(tuples, cell, flt, **kw)
    if fn == "f3":
        return f3_distribution(tuples, cell, flt, **kw)
    if fn == "f4":
        if "threshold" not in kw:
            raise AggregationError("f4 needs a threshold")
        return f4_fraction_below(tuples, cell, kw.pop("threshold"), flt, **kw)
    raise AggregationError(f"unknown function {fn!r}; choose from {FUNCTIONS}")


# --- privacy -----------------------------------------------------------------

class CellIndex:
    """Tuples sorted by cell code, so all tuples under a prefix form one
    contiguous run found by bisection."""

    def __init__(self, tuples):
        self.tuples = sorted(tuples, key=lambda tp: tp.g)
        self.keys = [tp.g for tp in self.tuples]

    def under(self, prefix: str) -> list:
        lo = bisect_left(self.keys, prefix)
        hi = bisect_left(self.keys, prefix + "~", lo)  # "~" sorts after every base32 digit
        return self.tuples[lo:hi]

    def __len__(self) -> int:
        return len(self.tuples)


def privacy_gate(fn: str, tuples, cell: str, flt: Filter | None = None, k_min: int = DEFAULT_K_MIN,
                 min_len: int = DEFAULT_MIN_LEN, **kw) -> AggregateResult:
    """Aggregate at the requested cell, or at the longest prefix holding at
    least ``k_min`` distinct participants; suppressed when even ``min_len``
    falls short. Suppressed results carry no value and no counts.

    ``tuples`` may be a prebuilt :class:`CellIndex` (then ``flt`` and quality
    gating are assumed to be applied already).
    """
    if k_min < 2:
        raise AggregationError("k_min must be at least 2")
    if min_len < 1:
        raise AggregationError("min_len must be at least 1")
    cell = validate_code(cell)
    if isinstance(tuples, CellIndex):
        index = tuples
    else:
        index = CellIndex(_gate_pool(tuples, flt, kw))
    for length in range(len(cell), min_len - 1, -1):
        prefix = cell[:length]
        sub = index.under(prefix)
        if len({tp.u for tp in sub}) >= k_min:
            res = run_function(fn, sub, prefix, None, **kw)
            res.requested = cell
            return res
    return AggregateResult(cell[:min_len] if len(cell) >= min_len else cell, fn,
                           _check_single_indicator(index.tuples),
                           suppressed=True, reason=f"fewer than {k_min} participants", requested=cell)


def _gate_pool(tuples, flt, kw) -> list:
    flt = flt or ALL
    pool = [tp for tp in tuples if flt(tp)]
    if kw.get("weighting") == "gated":
        # count participants after quality gating, as the function will see them
        pool = [tp for tp in pool if tp.quality >= kw.get("gate", 0.6)]
    return pool


def _users_by_prefix(index: CellIndex, min_len: int, max_len: int) -> dict:
    users = defaultdict(set)
    for g, u in {(tp.g[:max_len], tp.u) for tp in index.tuples}:
        for length in range(min_len, min(max_len, len(g)) + 1):
            users[g[:length]].add(u)
    return users


def aggregate_cells(fn: str, tuples, cell_len: int = DEFAULT_CELL_LEN, flt: Filter | None = None,
                    k_min: int = DEFAULT_K_MIN, min_len: int = DEFAULT_MIN_LEN, **kw) -> list[AggregateResult]:
    """Gate-checked results for every cell of length ``cell_len`` holding
    tuples. Requests that coarsen to the same cell yield one result.

    Equivalent to calling :func:`privacy_gate` per cell; the gate decision
    is made first from distinct (cell, participant) pairs so each target
    cell is aggregated once.
    """
    if k_min < 2:
        raise AggregationError("k_min must be at least 2")
    index = CellIndex(_gate_pool(tuples, flt, kw))
    users = _users_by_prefix(index, min_len, cell_len)
    targets = {}
    for c in sorted({g[:cell_len] for g in index.keys}):
        hit = next((c[:n] for n in range(len(c), min_len - 1, -1) if len(users.get(c[:n], ())) >= k_min), None)
        if hit is not None:
            targets[(hit, False)] = None
        else:
            targets[(c[:min_len] if len(c) >= min_len else c, True)] = None
    out = []
    name = _check_single_indicator(index.tuples)
    for cell, suppressed in sorted(targets):
        if suppressed:
            out.append(AggregateResult(cell, fn, name, suppressed=True, reason=f"fewer than {k_min} participants"))
        else:
            out.append(run_function(fn, index.under(cell), cell, None, **kw))
    return out
