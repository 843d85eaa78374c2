import random
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geobehave.calendar import SchoolCalendar
from geobehave.indicators.catalog import CatalogError, IndicatorCatalog
from geobehave.indicators.derived import derive_indicators
from geobehave.indicators.values import IndicatorValue, read_values, write_values
from geobehave.ingest.generate import trajectory_fixes
from geobehave.lec.poi import POI
from geobehave.mobility.poi import Home, PoiIndex
from geobehave.mobility.timeline import build_timelines
from geobehave.timeutil import MS_PER_MIN, local_ms

TZ = "Europe/Athens"
FIRST = date(2019, 9, 9)
WEEK = (FIRST, FIRST + timedelta(days=6))
FORTNIGHT = (FIRST, FIRST + timedelta(days=13))

HOME = (40.6300, 22.9400)
SCHOOL = (40.6435, 22.9400)  # 1.5 km due north


def _at(day_offset, clock):
    return local_ms(FIRST + timedelta(days=day_offset), clock, TZ)


def _event(name, day, clock, value, q=1.0, pid="p1"):
    t = _at(day, clock)
    return IndicatorValue(pid, name, t, t, value, q)


def _by_name(values):
    return {v.name: v for v in values}


def test_catalog_ids_unique_and_known():
    cat = IndicatorCatalog.default()
    assert len(cat.ids) == len(set(cat.ids))
    for s in cat.specs.values():
        assert all(i in cat for i in s.inputs)
    with pytest.raises(CatalogError) as err:
        cat["step_count"]
    assert "daily_steps" in str(err.value) and "sleep_hours" in str(err.value)


def test_catalog_domains():
    cat = IndicatorCatalog.default()
    cat.check("activity_intensity", "light")
    cat.check("activity_at_school", {"sedentary": 0.5, "light": 0.5})
    for name, bad in (("activity_intensity", "slow"), ("steps", -1), ("steps", 1.5), ("met", float("nan")),
                      ("activity_at_school", {"sedentary": 0.7})):
        with pytest.raises(CatalogError):
            cat.check(name, bad)
    with pytest.raises(CatalogError):
        IndicatorCatalog.default({"steps": {"domain": "real"}})


def test_fast_food_rate_over_two_weeks():
    base = [_event("food_category", d, "13:00", "fast_food") for d in (0, 2, 4, 7, 9, 11)]
    base += [_event("food_category", d, "20:00", "home_cooked") for d in range(14)]
    values, _ = derive_indicators(base, [], FORTNIGHT, TZ)
    assert _by_name(values)["fast_food_per_week"].value == pytest.approx(3.0)


def test_meal_rates_and_schedule_sd():
    base = [_event("meal", d, "13:30", "lunch") for d in range(7)]
    base += [_event("meal", d, "08:00" if d % 2 else "08:20", "breakfast") for d in range(6)]
    got = _by_name(derive_indicators(base, [], WEEK, TZ)[0])
    assert got["lunch_per_week"].value == pytest.approx(7.0)
    assert got["dinner_per_week"].value == 0.0
    # lunch spread 0, breakfast spread 10 min -> mean 5
    assert got["eating_schedule_sd"].value == pytest.approx(5.0)

    same = [_event("meal", d, "19:00", "dinner") for d in range(7)]
    assert _by_name(derive_indicators(same, [], WEEK, TZ)[0])["eating_schedule_sd"].value == 0.0


def test_missing_inputs_are_omitted_with_reason():
    values, omitted = derive_indicators([_event("sleep_hours", 1, "00:00", 8.0)], [], WEEK, TZ)
    names = {o.name: o.reason for o in omitted}
    assert "fast_food_per_week" in names and "food_category" in names["fast_food_per_week"]
    assert _by_name(values)["avg_sleep_hours"].value == 8.0
    assert "fast_food_per_week" not in _by_name(values)


def test_short_window_is_rejected():
    with pytest.raises(ValueError):
        derive_indicators([], [], (FIRST, FIRST + timedelta(days=5)), TZ)


def test_derived_quality_is_minimum_of_inputs():
    base = [_event("sleep_hours", d, "00:00", 7.0 + d / 10, q=1.0 - d / 20) for d in range(7)]
    got = _by_name(derive_indicators(base, [], WEEK, TZ)[0])["avg_sleep_hours"]
    assert got.value == pytest.approx(7.3)
    assert got.quality == pytest.approx(0.7)


def test_activity_pmfs_on_school_day():
    cal = SchoolCalendar(school_days=frozenset({FIRST.isoformat()}))
    base = []
    for k in range(60):  # 10:00-11:00, 40 sedentary and 20 light
        base.append(IndicatorValue("p1", "activity_intensity", _at(0, "10:00") + k * MS_PER_MIN,
                                   _at(0, "10:01") + k * MS_PER_MIN, "sedentary" if k < 40 else "light"))
    for k in range(30):  # 16:00-16:30, all moderate
        base.append(IndicatorValue("p1", "activity_intensity", _at(0, "16:00") + k * MS_PER_MIN,
                                   _at(0, "16:01") + k * MS_PER_MIN, "moderate"))
    got = derive_indicators(base, [], WEEK, TZ, cal)[0]
    by = _by_name(got)
    assert by["activity_at_school"].value == pytest.approx({"sedentary": 2 / 3, "light": 1 / 3})
    assert by["activity_after_school"].value == {"moderate": 1.0}
    sed = [v for v in got if v.name == "sedentary_after_school_minutes"]
    assert [v.value for v in sed] == [0.0]


def _commute_stream(walk_minutes=18, days=1):
    fixes = []
    for d in range(days):
        leave = _at(d, "07:30")
        arrive = leave + walk_minutes * MS_PER_MIN
        plan = [
            {"kind": "stop", "start": _at(d, "06:30"), "end": leave, "lat": HOME[0], "lon": HOME[1]},
            {"kind": "move", "start": leave, "end": arrive, "from": HOME, "to": SCHOOL},
            {"kind": "stop", "start": arrive, "end": _at(d, "14:00"), "lat": SCHOOL[0], "lon": SCHOOL[1]},
        ]
        fixes += trajectory_fixes(plan, _at(d, "06:30"), _at(d, "14:00"), 5.0, seed=d)
    t = np.array([f.t for f in fixes])
    return t, np.array([f.lat for f in fixes]), np.array([f.lon for f in fixes])


def test_walk_to_school_commute_minutes():
    t, lat, lon = _commute_stream()
    cal = SchoolCalendar(school_days=frozenset({FIRST.isoformat()}))
    pois = PoiIndex.from_pois([POI(SCHOOL[0], SCHOOL[1], "osm", "amenity=school", "school")])
    home = Home("sx0r4k0", HOME[0], HOME[1])
    tls = build_timelines(t, lat, lon, "p1", TZ, pois, home, cal)
    assert [m.transport_mode for m in tls[0].moves] == ["walking"]
    values, _ = derive_indicators([], tls, WEEK, TZ, cal)
    commute = [v for v in values if v.name == "active_commute_minutes"]
    assert len(commute) == 1
    assert commute[0].value == pytest.approx(18, abs=2)


def _random_base(rng, n):
    names = ["meal", "food_category", "sleep_hours", "sleep_interruptions", "activity_intensity"]
    out = []
    for _ in range(n):
        name = rng.choice(names)
        day, minute = rng.randrange(7), rng.randrange(1440)
        t = _at(day, "00:00") + minute * MS_PER_MIN
        value = {"meal": rng.choice(["breakfast", "lunch", "dinner", "snack"]),
                 "food_category": rng.choice(["fast_food", "home_cooked"]),
                 "sleep_hours": round(rng.uniform(5, 10), 3),
                 "sleep_interruptions": rng.randrange(4),
                 "activity_intensity": rng.choice(["sedentary", "light", "moderate"])}[name]
        out.append(IndicatorValue(rng.choice(["a", "b"]), name, t, t + MS_PER_MIN, value,
                                  round(rng.uniform(0.3, 1), 3)))
    return out


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 80))
def test_derivation_is_order_invariant(seed, n):
    rng = random.Random(seed)
    base = _random_base(rng, n)
    cal = SchoolCalendar(school_days=frozenset((FIRST + timedelta(days=d)).isoformat() for d in range(5)))
    a = derive_indicators(base, [], WEEK, TZ, cal)
    shuffled = list(base)
    rng.shuffle(shuffled)
    b = derive_indicators(shuffled, [], WEEK, TZ, cal)
    assert [v.to_row() for v in a[0]] == [v.to_row() for v in b[0]]
    assert [o.to_row() for o in a[1]] == [o.to_row() for o in b[1]]
    for v in a[0]:
        IndicatorCatalog.default().check(v.name, v.value)


def test_values_jsonl_round_trip(tmp_path):
    base = _random_base(random.Random(3), 50)
    base.append(IndicatorValue("a", "activity_at_school", 0, 10, {"light": 0.25, "sedentary": 0.75}, 0.5,
                               "sx0r4k0"))
    path = tmp_path / "v.jsonl"
    assert write_values(base, path) == len(base)
    assert list(read_values(path)) == base
    assert [v.name for v in read_values(path, ["meal"])] == ["meal"] * sum(v.name == "meal" for v in base)


def test_value_validation():
    with pytest.raises(ValueError):
        IndicatorValue("p", "met", 10, 5, 1.0)
    with pytest.raises(ValueError):
        IndicatorValue("p", "met", 0, 5, 1.0, quality=1.5)
