"""Synthetic cohorts with planted ground truth.

A generator spec (a JSON document) describes places, participants, their
daily schedule templates and sleep habits. From it :func:`generate_cohort`
produces sensor streams (1 Hz-per-minute GPS fixes, raw acceleration at a
fixed nominal rate, self-reported meals) together with a
:class:`GroundTruth` recording exactly what was planted, so that every
downstream algorithm can be scored against it.

Signal model: the acceleration vector points along a fixed unit vector
whose magnitude is ``1 g + A * (sin(phi) + h * sin(2 phi + 0.7)) + noise``,
with frequency, amplitude and harmonic weight set per minute from the
planted activity label.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from ..geocell import haversine_m
from ..mobility.types import MoveEvent, StopEvent, Timeline
from ..timeutil import MS_PER_MIN, clock_minutes, day_bounds, local_ms, parse_date
from .records import AccelSegment, GpsSample, Participant, SelfReportEvent, SensorStream


class GeneratorSpecError(ValueError):
    pass


# label -> (frequency Hz, amplitude range g, harmonic weight, noise sd g)
SIGNALS = {
    "sleep": (0.5, (0.0, 0.0), 0.0, 0.001),
    "sedentary": (0.5, (0.006, 0.009), 0.0, 0.001),
    "light": (1.0, (0.03, 0.07), 0.0, 0.002),
    "cycling": (1.2, (0.04, 0.06), 0.0, 0.003),
    "vehicle": (0.5, (0.006, 0.009), 0.0, 0.003),
    "moderate": (1.8, (0.3, 0.4), 0.3, 0.005),
    "vigorous": (2.1, (0.75, 0.85), 0.3, 0.005),
}
STEP_LABELS = {"moderate", "vigorous"}
# intensity implied by each planted label
LABEL_INTENSITY = {
    "sleep": "sedentary", "sedentary": "sedentary", "vehicle": "sedentary",
    "light": "light", "cycling": "light", "moderate": "moderate", "vigorous": "vigorous",
}
MOVE_LABEL = {"walking": "moderate", "cycling": "cycling", "vehicle": "vehicle"}
# per place type: list of (label, probability) for 10-minute chunks
PLACE_ACTIVITY = {
    "home": [("sedentary", 0.75), ("light", 0.25)],
    "school": [("sedentary", 0.7), ("light", 0.3)],
    "park": [("vigorous", 0.5), ("moderate", 0.3), ("light", 0.2)],
    "sports": [("vigorous", 0.6), ("moderate", 0.2), ("light", 0.2)],
}
DEFAULT_ACTIVITY = [("sedentary", 0.7), ("light", 0.3)]


@dataclass
class Block:
    place: str
    start: str
    end: str
    mode: str | None = None
    pe: tuple | None = None
    activity: str | None = None
    meals: list = field(default_factory=list)


@dataclass
class GroundTruth:
    seed: int
    stops: dict = field(default_factory=lambda: defaultdict(list))
    moves: dict = field(default_factory=lambda: defaultdict(list))
    sleep: dict = field(default_factory=lambda: defaultdict(list))
    meals: dict = field(default_factory=lambda: defaultdict(list))
    steps: dict = field(default_factory=lambda: defaultdict(dict))
    intensity: dict = field(default_factory=lambda: defaultdict(list))
    gaps: dict = field(default_factory=lambda: defaultdict(list))
    day_types: dict = field(default_factory=dict)
    homes: dict = field(default_factory=dict)
    transitions: dict = field(default_factory=dict)

    def transition_matrix(self, pid: str, day_type: str) -> dict:
        return self.transitions.get(pid, {}).get(day_type, {})

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "day_types": self.day_types,
            "homes": self.homes,
            "stops": dict(self.stops),
            "moves": dict(self.moves),
            "sleep": dict(self.sleep),
            "meals": dict(self.meals),
            "steps_per_day": dict(self.steps),
            "intensity_runs": dict(self.intensity),
            "gaps": dict(self.gaps),
            "transitions": self.transitions,
        }


@dataclass
class GeneratorSpec:
    raw: dict

    def __post_init__(self):
        r = self.raw
        try:
            self.start_date = parse_date(r["start_date"])
            self.n_days = int(r["n_days"])
            self.timezone = r.get("timezone", "UTC")
            self.rate_hz = float(r.get("accel_rate_hz", 10))
            self.gps_noise_m = float(r.get("gps_noise_m", 10))
            doze = r.get("doze", {})
            self.doze_rate = float(doze.get("rate_per_day", 0.0))
            self.doze_minutes = (int(doze.get("min_minutes", 10)), int(doze.get("max_minutes", 60)))
            self.speeds = {"walking": 4.5, "cycling": 13.0, "vehicle": 28.0, **r.get("speeds_kmh", {})}
            self.calendar = r.get("calendar", {})
            self.places = {p["id"]: p for p in r.get("places", [])}
            self.templates = {k: [Block(**b) for b in v] for k, v in r.get("templates", {}).items()}
            self.participants = r["participants"]
        except (KeyError, TypeError, ValueError) as exc:
            raise GeneratorSpecError(f"invalid generator spec: {exc}") from None
        if self.n_days < 1:
            raise GeneratorSpecError("n_days must be positive")
        if not 1.0 <= self.rate_hz <= 100.0:
            raise GeneratorSpecError("accel_rate_hz out of range")
        if self.doze_minutes[0] <= 5 or self.doze_minutes[1] < self.doze_minutes[0]:
            raise GeneratorSpecError("doze gap minutes must exceed the 5-minute gap threshold")
        ids = [p["id"] for p in self.participants]
        if len(set(ids)) != len(ids):
            raise GeneratorSpecError("duplicate participant ids")
        for p in self.participants:
            for key in ("school_day", "non_school_day"):
                for variant in p.get(key, []):
                    if variant["template"] not in self.templates:
                        raise GeneratorSpecError(f"unknown template {variant['template']!r}")

    @property
    def dates(self) -> list[date]:
        return [self.start_date + timedelta(days=i) for i in range(self.n_days)]

    def is_school_day(self, d: date) -> bool:
        cal = self.calendar
        if "school_days" in cal:
            return d.isoformat() in set(cal["school_days"])
        weekdays = cal.get("weekdays", [0, 1, 2, 3, 4])
        return d.weekday() in weekdays and d.isoformat() not in set(cal.get("holidays", []))

    def calendar_document(self) -> dict:
        cal = self.calendar
        return {
            "id": cal.get("id", "default"),
            "school_start": cal.get("school_start", "08:00"),
            "school_end": cal.get("school_end", "14:00"),
            "school_days": [d.isoformat() for d in self.dates if self.is_school_day(d)],
        }


def _choose(rng, options: list[tuple[str, float]]) -> str:
    labels = [o[0] for o in options]
    probs = np.array([o[1] for o in options], dtype=float)
    return labels[int(rng.choice(len(labels), p=probs / probs.sum()))]


def _place_coords(spec: GeneratorSpec, part: dict, place: str) -> tuple[float, float, str]:
    if place == "home":
        return part["home"][0], part["home"][1], "home"
    pid = part.get("school") if place == "school" else place
    p = spec.places.get(pid)
    if p is None:
        raise GeneratorSpecError(f"participant {part['id']}: unknown place {place!r}")
    return p["lat"], p["lon"], p["type"]


def _plan_day(spec: GeneratorSpec, part: dict, d: date, blocks: list[Block]) -> list[dict]:
    """Resolve a template into timed stops and moves (UTC ms).

    A block's start is the arrival time and its end the earliest departure;
    travel times follow from distance and mode speed. The day starts and
    ends at home.
    """
    tz = spec.timezone
    lo, hi = day_bounds(d, tz)
    hlat, hlon = part["home"]
    cur = {"kind": "stop", "start": lo, "min_end": lo, "place": "home", "type": "home",
           "lat": hlat, "lon": hlon, "activity": None, "pe": None, "meals": []}
    plan = []
    last_mode = part.get("mode", "walking")

    def leg(mode, dest_lat, dest_lon):
        if mode not in spec.speeds:
            raise GeneratorSpecError(f"unknown transport mode {mode!r}")
        dist = haversine_m(cur["lat"], cur["lon"], dest_lat, dest_lon)
        minutes = max(2, int(round(dist / (spec.speeds[mode] / 3.6) / 60.0)))
        return dist, minutes * MS_PER_MIN

    def move(start, end, mode, dist, lat, lon, ptype):
        return {"kind": "move", "start": start, "end": end, "mode": mode,
                "from": (cur["lat"], cur["lon"]), "to": (lat, lon),
                "origin": cur["type"], "dest": ptype, "distance_m": dist}

    for b in blocks:
        lat, lon, ptype = _place_coords(spec, part, b.place)
        start, end = local_ms(d, b.start, tz), local_ms(d, b.end, tz)
        if end <= start:
            raise GeneratorSpecError(f"{part['id']} {d}: block {b.place} ends before it starts")
        last_mode = b.mode or part.get("mode", "walking")
        dist, travel = leg(last_mode, lat, lon)
        depart = start - travel
        if depart < cur["min_end"] or depart <= cur["start"]:
            raise GeneratorSpecError(
                f"{part['id']} {d}: schedule blocks overlap (cannot reach {b.place} by {b.start})")
        cur["end"] = depart
        plan.append(cur)
        plan.append(move(depart, start, last_mode, dist, lat, lon, ptype))
        cur = {"kind": "stop", "start": start, "min_end": end, "place": b.place, "type": ptype,
               "lat": lat, "lon": lon, "activity": b.activity, "pe": b.pe, "meals": b.meals}
    if cur["place"] != "home":
        dist, travel = leg(last_mode, hlat, hlon)
        depart = cur["min_end"]
        if depart + travel >= hi - 60 * MS_PER_MIN:
            raise GeneratorSpecError(f"{part['id']} {d}: cannot return home before midnight")
        cur["end"] = depart
        plan.append(cur)
        plan.append(move(depart, depart + travel, last_mode, dist, hlat, hlon, "home"))
        cur = {"kind": "stop", "start": depart + travel, "place": "home", "type": "home",
               "lat": hlat, "lon": hlon, "activity": None, "pe": None, "meals": []}
    cur["end"] = hi
    plan.append(cur)
    return plan


def check_variant(spec: GeneratorSpec, part: dict, template: str, d: date) -> None:
    """Raise unless a template fits the participant's day for every draw of
    the sleep jitter (travel times do not depend on the seed)."""
    plan = _plan_day(spec, part, d, spec.templates[template])
    sl = part.get("sleep", {"bed": "22:30", "wake": "07:00"})
    jitter = int(sl.get("jitter_min", 0)) * MS_PER_MIN
    tz = spec.timezone
    moves = [ev for ev in plan if ev["kind"] == "move"]
    if not moves:
        return
    latest_wake = local_ms(d, sl["wake"], tz) + jitter
    earliest_bed = local_ms(d, sl["bed"], tz) - jitter
    if latest_wake > moves[0]["start"] - 10 * MS_PER_MIN:
        raise GeneratorSpecError(f"{part['id']} {template}: may wake after the first departure")
    if earliest_bed < moves[-1]["end"] + 10 * MS_PER_MIN:
        raise GeneratorSpecError(f"{part['id']} {template}: may go to bed before returning home")


def check_variants(spec: GeneratorSpec) -> None:
    """Every participant's day variants must be feasible on the first date
    of the matching day type."""
    first = {}
    for d in spec.dates:
        first.setdefault("school_day" if spec.is_school_day(d) else "non_school_day", d)
    for part in spec.participants:
        for key, d in first.items():
            for variant in part.get(key, []):
                check_variant(spec, part, variant["template"], d)


def _minute_labels(spec, part, d, plan, sleep_nights, rng) -> tuple[np.ndarray, int]:
    lo, hi = day_bounds(d, spec.timezone)
    n = (hi - lo) // MS_PER_MIN
    labels = np.empty(n, dtype=object)
    for ev in plan:
        a = (ev["start"] - lo) // MS_PER_MIN
        b = (ev["end"] - lo) // MS_PER_MIN
        if ev["kind"] == "move":
            labels[a:b] = MOVE_LABEL[ev["mode"]]
            continue
        opts = PLACE_ACTIVITY.get(ev["type"], DEFAULT_ACTIVITY)
        if ev["activity"]:
            opts = [(ev["activity"], 1.0)]
        for c in range(a, b, 10):
            labels[c:min(b, c + 10)] = _choose(rng, opts)
        if ev["pe"]:
            pa = (local_ms(d, ev["pe"][0], spec.timezone) - lo) // MS_PER_MIN
            pb = (local_ms(d, ev["pe"][1], spec.timezone) - lo) // MS_PER_MIN
            labels[max(a, pa):min(b, pb)] = "vigorous"
    for s, e in sleep_nights:
        a = max(0, (s - lo) // MS_PER_MIN)
        b = min(n, (e - lo) // MS_PER_MIN)
        if b > a:
            labels[a:b] = "sleep"
    return labels, lo


def _synth_vm(labels_per_min: np.ndarray, rate: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Vector magnitude for consecutive minutes; also per-minute step counts."""
    per_min = int(round(rate * 60))
    n_min = len(labels_per_min)
    freq = np.empty(n_min)
    amp = np.empty(n_min)
    harm = np.empty(n_min)
    noise = np.empty(n_min)
    for lab in sorted(set(labels_per_min.tolist())):
        m = labels_per_min == lab
        f, (a0, a1), h, sd = SIGNALS[lab]
        if lab in STEP_LABELS:
            freq[m] = f + rng.uniform(-0.1, 0.1, m.sum())
        else:
            freq[m] = f
        amp[m] = rng.uniform(a0, a1, m.sum())
        harm[m] = h
        noise[m] = sd
    f_s = np.repeat(freq, per_min)
    phase = 2 * np.pi * np.cumsum(f_s) / rate + rng.uniform(0, 2 * np.pi)
    vm = 1.0 + np.repeat(amp, per_min) * (np.sin(phase) + np.repeat(harm, per_min) * np.sin(2 * phase + 0.7))
    vm += rng.normal(0.0, 1.0, len(vm)) * np.repeat(noise, per_min)
    steps = np.where(np.isin(labels_per_min, list(STEP_LABELS)), freq * 60.0, 0.0)
    return vm, steps


def _random_unit(rng) -> np.ndarray:
    v = rng.normal(size=3)
    v[2] = abs(v[2]) + 2.0  # mostly "up", like a wrist at rest
    return v / np.linalg.norm(v)


def _offset(lat: float, lon: float, north_m: float, east_m: float) -> tuple[float, float]:
    dlat = north_m / 111_194.9
    dlon = east_m / (111_194.9 * math.cos(math.radians(lat)))
    return lat + dlat, lon + dlon


def fixes_for_plan(plan: list[dict], t_grid: np.ndarray, noise_m: float, rng) -> list[GpsSample]:
    """One GPS fix per grid time, placed by the plan plus gaussian noise."""
    out = []
    j = 0
    for t in t_grid.tolist():
        while j < len(plan) - 1 and t >= plan[j]["end"]:
            j += 1
        ev = plan[j]
        if ev["kind"] == "stop":
            lat, lon = ev["lat"], ev["lon"]
        else:
            frac = (t - ev["start"]) / max(1, ev["end"] - ev["start"])
            frac = min(max(frac, 0.0), 1.0)
            lat = ev["from"][0] + frac * (ev["to"][0] - ev["from"][0])
            lon = ev["from"][1] + frac * (ev["to"][1] - ev["from"][1])
        n, e = rng.normal(0.0, noise_m, 2)
        lat, lon = _offset(lat, lon, n, e)
        out.append(GpsSample(int(t), lat, lon, float(abs(noise_m))))
    return out


DOZE_SLEEP_MARGIN_MS = 90 * MS_PER_MIN


def _doze_gaps(spec, plan, sleep_nights, rng) -> list[tuple[int, int]]:
    gaps = []
    if spec.doze_rate <= 0:
        return gaps
    k = rng.poisson(spec.doze_rate)
    lo_m, hi_m = spec.doze_minutes
    stops = [ev for ev in plan if ev["kind"] == "stop"]
    for _ in range(k):
        dur = int(rng.integers(lo_m, hi_m + 1)) * MS_PER_MIN
        fits = [ev for ev in stops if ev["end"] - ev["start"] >= dur + 20 * MS_PER_MIN]
        if not fits:
            continue
        ev = fits[int(rng.integers(len(fits)))]
        slack = (ev["end"] - ev["start"] - dur) // MS_PER_MIN
        s = ev["start"] + int(rng.integers(5, slack - 5 + 1)) * MS_PER_MIN
        # keep gaps clear of planted sleep: an unrecorded stretch next to bedtime
        # is indistinguishable from sleep onset in minute counts
        if any(s < se + DOZE_SLEEP_MARGIN_MS and s + dur > ss - DOZE_SLEEP_MARGIN_MS for ss, se in sleep_nights):
            continue
        if any(s < ge and s + dur > gs for gs, ge in gaps):
            continue
        gaps.append((s, s + dur))
    return sorted(gaps)


def _sleep_window(spec, part, night: date, rng) -> tuple[int, int]:
    sl = part.get("sleep", {"bed": "22:30", "wake": "07:00"})
    jitter = int(sl.get("jitter_min", 0))
    bed = local_ms(night, sl["bed"], spec.timezone)
    wake = local_ms(night + timedelta(days=1), sl["wake"], spec.timezone)
    if jitter:
        bed += int(rng.integers(-jitter, jitter + 1)) * MS_PER_MIN
        wake += int(rng.integers(-jitter, jitter + 1)) * MS_PER_MIN
    return bed, wake


def _runs_of(labels: np.ndarray, lo: int) -> list[list]:
    out = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            out.append([lo + start * MS_PER_MIN, lo + i * MS_PER_MIN, str(labels[start])])
            start = i
    return out


def _transition_probs(counts: Counter) -> dict:
    rows = defaultdict(dict)
    totals = Counter()
    for (i, j), c in counts.items():
        totals[i] += c
    for (i, j), c in sorted(counts.items()):
        rows[i][j] = c / totals[i]
    return dict(rows)


def generate_cohort(spec: GeneratorSpec | dict, seed: int):
    """Streams, participants and ground truth for a generator spec.

    Returns (streams, participants, ground_truth); output is a pure function
    of (spec, seed). Holds every stream in memory; see :func:`iter_cohort`.
    """
    gt = GroundTruth(seed)
    streams, participants = {}, []
    for stream, participant in iter_cohort(spec, seed, gt):
        streams[stream.participant] = stream
        participants.append(participant)
    return streams, participants, gt


def iter_cohort(spec: GeneratorSpec | dict, seed: int, gt: GroundTruth):
    """Yield (stream, participant) one participant at a time, filling ``gt``.

    Each participant draws from its own RNG seeded by (seed, index), so the
    output does not depend on how many participants are consumed.
    """
    if isinstance(spec, dict):
        spec = GeneratorSpec(spec)
    check_variants(spec)
    tz = spec.timezone
    for d in spec.dates:
        gt.day_types[d.isoformat()] = "school" if spec.is_school_day(d) else "non_school"

    for index, part in enumerate(spec.participants):
        rng = np.random.default_rng([seed, index])
        pid = part["id"]
        participant = Participant(
            pid, part.get("age_band", "unknown"), part.get("gender", "unknown"),
            part.get("device_class", "smartphone"), spec.calendar.get("id", "default"), tz)
        gt.homes[pid] = [part["home"][0], part["home"][1]]
        u = _random_unit(rng)
        segments = []
        gps = []
        reports = []
        trans = {"school": Counter(), "non_school": Counter()}
        offset_ms = int(rng.integers(0, 60)) * 1000

        nights = {}
        for d in [spec.dates[0] - timedelta(days=1)] + spec.dates:
            nights[d] = _sleep_window(spec, part, d, rng)
        for d in spec.dates:
            day_type = "school" if spec.is_school_day(d) else "non_school"
            variants = part.get("school_day" if day_type == "school" else "non_school_day", [])
            if variants:
                probs = np.array([v.get("p", 1.0) for v in variants], dtype=float)
                choice = variants[int(rng.choice(len(variants), p=probs / probs.sum()))]
                blocks = spec.templates[choice["template"]]
            else:
                blocks = []
            plan = _plan_day(spec, part, d, blocks)
            lo, hi = day_bounds(d, tz)
            sleep_nights = [nights[d - timedelta(days=1)], nights[d]]
            first_depart = next((ev["start"] for ev in plan if ev["kind"] == "move"), None)
            last_arrive = max((ev["end"] for ev in plan if ev["kind"] == "move"), default=None)
            if first_depart is not None and sleep_nights[0][1] > first_depart - 10 * MS_PER_MIN:
                raise GeneratorSpecError(f"{pid} {d}: wakes after the first departure")
            if last_arrive is not None and sleep_nights[1][0] < last_arrive + 10 * MS_PER_MIN:
                raise GeneratorSpecError(f"{pid} {d}: goes to bed before returning home")

            labels, _ = _minute_labels(spec, part, d, plan, sleep_nights, rng)
            for na in part.get("night_activity", []):
                night = parse_date(na["night"])
                on = night if clock_minutes(na["time"]) >= 12 * 60 else night + timedelta(days=1)
                if on == d:
                    s = local_ms(d, na["time"], tz)
                    a = (s - lo) // MS_PER_MIN
                    labels[a:a + int(na["minutes"])] = na.get("label", "light")
            gaps = _doze_gaps(spec, plan, sleep_nights, rng)

            # accelerometer
            vm, steps_per_min = _synth_vm(labels, spec.rate_hz, rng)
            n = len(vm)
            t = lo + np.round(np.arange(n) * 1000.0 / spec.rate_hz).astype(np.int64)
            keep = np.ones(n, dtype=bool)
            minute_recorded = np.ones(len(labels), dtype=bool)
            for gs, ge in gaps:
                keep &= ~((t >= gs) & (t < ge))
                minute_recorded[(gs - lo) // MS_PER_MIN:(ge - lo) // MS_PER_MIN] = False
            edges = np.nonzero(np.diff(keep.astype(np.int8)))[0] + 1
            for part_idx in np.split(np.arange(n), edges):
                if len(part_idx) and keep[part_idx[0]]:
                    xyz = (vm[part_idx, None] * u[None, :]).astype(np.float32)
                    segments.append(AccelSegment(t[part_idx], xyz, spec.rate_hz))

            # gps, one fix per minute outside gaps
            grid = lo + offset_ms + np.arange((hi - lo) // MS_PER_MIN, dtype=np.int64) * MS_PER_MIN
            for gs, ge in gaps:
                grid = grid[(grid < gs) | (grid >= ge)]
            gps.extend(fixes_for_plan(plan, grid, spec.gps_noise_m, rng))

            # meals
            day_meals = []
            for ev in plan:
                if ev["kind"] == "stop":
                    for m in ev.get("meals") or []:
                        day_meals.append(m)
            day_meals.extend(part.get("home_meals", []))
            for m in day_meals:
                mt = local_ms(d, m["time"], tz)
                ev = SelfReportEvent(mt, "meal", m["meal_type"], m.get("food_category", "home_cooked"))
                reports.append(ev)
                gt.meals[pid].append({"t": mt, "meal_type": m["meal_type"],
                                      "food_category": ev.food_category})

            # ground truth
            for ev in plan:
                if ev["kind"] == "stop":
                    gt.stops[pid].append({"start": ev["start"], "end": ev["end"], "poi_type": ev["type"],
                                          "place": ev["place"], "lat": ev["lat"], "lon": ev["lon"]})
                else:
                    gt.moves[pid].append({"start": ev["start"], "end": ev["end"], "mode": ev["mode"],
                                          "origin": ev["origin"], "dest": ev["dest"],
                                          "distance_m": round(ev["distance_m"], 2)})
            types = [ev["type"] for ev in plan if ev["kind"] == "stop"]
            for a, b in zip(types, types[1:]):
                trans[day_type][(a, b)] += 1
            recorded_steps = float(np.sum(steps_per_min[minute_recorded]))
            gt.steps[pid][d.isoformat()] = round(recorded_steps, 1)
            gt.intensity[pid].extend(_runs_of(np.array([LABEL_INTENSITY[x] for x in labels]), lo))
            gt.gaps[pid].extend([list(g) for g in gaps])
            night_start, night_end = nights[d]
            gt.sleep[pid].append({"night": d.isoformat(), "start": night_start, "end": night_end,
                                  "interruptions": sum(1 for na in part.get("night_activity", [])
                                                       if na["night"] == d.isoformat()
                                                       and na["minutes"] >= 5)})

        # the last planted night runs past the final day and has no recording
        gt.sleep[pid] = gt.sleep[pid][:-1]
        reports.sort(key=lambda r: r.t)
        dedup = []
        for r in reports:
            if dedup and r.t <= dedup[-1].t:
                r = SelfReportEvent(dedup[-1].t + 1, r.kind, r.meal_type, r.food_category, r.photo_ref)
            dedup.append(r)
        gt.transitions[pid] = {k: _transition_probs(v) for k, v in trans.items()}
        yield SensorStream(pid, segments, gps, dedup, tz), participant


def trajectory_fixes(plan: list[dict], start: int, end: int, noise_m: float, seed: int,
                     period_ms: int = MS_PER_MIN) -> list[GpsSample]:
    """GPS fixes for a hand-written stop/move plan (for tests and demos).

    ``plan`` entries: ``{"kind": "stop", "start", "end", "lat", "lon"}`` or
    ``{"kind": "move", "start", "end", "from": (lat, lon), "to": (lat, lon)}``.
    """
    rng = np.random.default_rng(seed)
    grid = np.arange(start, end, period_ms, dtype=np.int64)
    return fixes_for_plan(plan, grid, noise_m, rng)


def synth_segment(labels: list[str] | np.ndarray, t0: int, rate_hz: float, seed: int = 0,
                  amplitude_scale: float = 1.0) -> tuple[AccelSegment, np.ndarray]:
    """Acceleration for consecutive planted minute labels starting at ``t0``.

    Returns the segment and the planted steps per minute.
    """
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels, dtype=object)
    vm, steps = _synth_vm(labels, rate_hz, rng)
    if amplitude_scale != 1.0:
        vm = 1.0 + (vm - 1.0) * amplitude_scale
    t = t0 + np.round(np.arange(len(vm)) * 1000.0 / rate_hz).astype(np.int64)
    u = _random_unit(rng)
    return AccelSegment(t, (vm[:, None] * u[None, :]).astype(np.float64), rate_hz), steps


def sample_markov_timelines(P: dict, n_days: int, seed: int, moves_per_day: int = 4,
                            start_state: str = "home", participant: str = "synthetic",
                            day_type: str = "school", start_date: date = date(2020, 1, 1)):
    """Timelines whose stop sequence is drawn from a first-order Markov chain.

    ``P`` maps state -> {next_state: probability}. Each day starts at
    ``start_state`` and makes ``moves_per_day`` transitions.
    """
    rng = np.random.default_rng(seed)
    timelines = []
    for k in range(n_days):
        d = start_date + timedelta(days=k)
        t = (k * 86_400_000) + 1_577_836_800_000
        state = start_state
        events = [StopEvent(t, t + 60 * MS_PER_MIN, 0.0, 0.0, state)]
        t += 60 * MS_PER_MIN
        for _ in range(moves_per_day):
            nxt_states = sorted(P[state])
            probs = np.array([P[state][s] for s in nxt_states])
            nxt = nxt_states[int(rng.choice(len(nxt_states), p=probs / probs.sum()))]
            mode = ("walking", "cycling", "vehicle")[int(rng.integers(3))]
            events.append(MoveEvent(t, t + 15 * MS_PER_MIN, state, nxt, 1000.0, mode))
            t += 15 * MS_PER_MIN
            events.append(StopEvent(t, t + 60 * MS_PER_MIN, 0.0, 0.0, nxt))
            t += 60 * MS_PER_MIN
            state = nxt
        timelines.append(Timeline(participant, d, day_type, events))
    return timelines
