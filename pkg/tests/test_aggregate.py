import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geobehave.aggregate.export import export_choropleth, validate_geojson
from geobehave.aggregate.functions import (
    AggregateResult,
    AggregationError,
    aggregate_cells,
    by_attribute,
    by_participants,
    f1_avg_over_individuals,
    f2_weighted_avg,
    f3_distribution,
    f4_fraction_below,
    privacy_gate,
    users_where,
)
from geobehave.aggregate.tuples import IndicatorTuple, TupleStore, build_tuples, time_key
from geobehave.geocell import decode
from geobehave.indicators.catalog import IndicatorCatalog
from geobehave.indicators.values import IndicatorValue

CELL = "sx0r4k"


def tp(u, value, g="sx0r4k0", name="daily_steps", q=1.0, t="20190909", ts=0):
    return IndicatorTuple(u, g, t, name, value, q, "resources", ts, 3_600_000)


def test_f1_f2_differ_on_unequal_contribution():
    rows = [tp("a", 1), tp("a", 2), tp("a", 3), tp("b", 4)]
    assert f1_avg_over_individuals(rows, CELL).value == pytest.approx(3.0)
    assert f2_weighted_avg(rows, CELL).value == pytest.approx(2.5)
    r = f1_avg_over_individuals(rows, CELL)
    assert (r.n_participants, r.n_tuples, r.indicator) == (2, 4, "daily_steps")


def test_cell_selection_is_by_prefix():
    rows = [tp("a", 10, "sx0r4k0"), tp("b", 20, "sx0r4k9"), tp("c", 1000, "sx0r4m0")]
    assert f1_avg_over_individuals(rows, CELL).value == 15.0
    assert f1_avg_over_individuals(rows, "sx0r4").value == pytest.approx(1030 / 3)
    assert f1_avg_over_individuals(rows, "u4pr").suppressed


def test_f3_categorical_transport_modes():
    rows = [tp(u, m, name="transport_mode") for u, m in
            zip("abcd", ["walking", "walking", "vehicle", "cycling"])]
    r = f3_distribution(rows, CELL, categories=["walking", "cycling", "vehicle"])
    assert r.value == pytest.approx([0.5, 0.25, 0.25])
    assert r.labels == ["walking", "cycling", "vehicle"]
    with pytest.raises(AggregationError):
        f3_distribution(rows, CELL, categories=["walking"])


def test_f3_pmf_values_average_per_participant():
    rows = [tp("a", {"sedentary": 1.0}, name="activity_at_school"),
            tp("a", {"light": 1.0}, name="activity_at_school"),
            tp("b", {"light": 0.5, "moderate": 0.5}, name="activity_at_school")]
    r = f3_distribution(rows, CELL, categories=["sedentary", "light", "moderate"])
    assert r.value == pytest.approx([0.25, 0.5, 0.25])


def test_f3_bins_and_clamping():
    rows = [tp(u, v) for u, v in zip("abcde", [0, 25, 49.9, 100, 150])]
    r = f3_distribution(rows, CELL, bins=[0, 25, 50, 75, 100])
    assert r.value == pytest.approx([0.2, 0.4, 0.0, 0.4])
    assert r.clamped == 1
    assert r.labels == ["[0,25)", "[25,50)", "[50,75)", "[75,100]"]
    with pytest.raises(AggregationError):
        f3_distribution(rows, CELL, bins=[0, 0, 1])


def test_f4_threshold():
    rows = [tp(u, v) for u, v in zip("abcd", [3000, 4500, 6000, 8000])]
    assert f4_fraction_below(rows, CELL, 5000).value == 0.5
    assert f4_fraction_below(rows, CELL, 6000).value == 0.75
    assert f4_fraction_below(rows, CELL, 6000, strict=True).value == 0.5


def test_weighting_modes():
    rows = [tp("a", 10, q=1.0), tp("a", 0, q=0.25), tp("b", 4, q=0.5)]
    assert f2_weighted_avg(rows, CELL, weighting="weighted").value == pytest.approx((10 + 0 + 2) / 1.75)
    assert f1_avg_over_individuals(rows, CELL, weighting="gated", gate=0.6).value == 10.0
    with pytest.raises(AggregationError):
        f1_avg_over_individuals(rows, CELL, weighting="fancy")


def test_filters():
    attrs = {"a": {"gender": "f"}, "b": {"gender": "m"}, "c": {"gender": "f"}}
    rows = [tp("a", 2), tp("b", 100), tp("c", 4)]
    assert f1_avg_over_individuals(rows, CELL, by_attribute(attrs, "gender", {"f"})).value == 3.0
    low = users_where(rows, lambda m: m < 50)
    assert low == {"a", "c"}
    assert f1_avg_over_individuals(rows, CELL, by_participants(low)).value == 3.0


def test_non_numeric_values_rejected():
    with pytest.raises(AggregationError):
        f1_avg_over_individuals([tp("a", "walking")], CELL)
    with pytest.raises(AggregationError):
        f1_avg_over_individuals([tp("a", 1), tp("b", 2, name="met")], CELL)


def test_gate_coarsens_to_first_sufficient_prefix():
    rows = [tp("a", 1, "sx0r4k0"), tp("b", 2, "sx0r4k1")] + [tp(f"u{k}", 3, f"sx0r4m{k}") for k in range(3)]
    r = privacy_gate("f1", rows, CELL, k_min=4, min_len=4)
    assert r.cell == "sx0r4" and r.requested == CELL and not r.suppressed
    assert r.n_participants == 5
    r = privacy_gate("f1", rows, CELL, k_min=2, min_len=4)
    assert r.cell == CELL and r.value == 1.5


def test_gate_suppresses_on_exhaustion():
    rows = [tp("a", 1, "sx0r4k0"), tp("b", 2, "sx0r4k1")]
    r = privacy_gate("f1", rows, CELL, k_min=3, min_len=4)
    assert r.suppressed and r.value is None and r.n_participants == 0
    d = r.to_dict()
    assert "value" not in d and "n_participants" not in d
    assert d["cell"] == "sx0r"
    with pytest.raises(AggregationError):
        privacy_gate("f1", rows, CELL, k_min=1)


def test_gate_counts_participants_not_tuples():
    rows = [tp("a", k, "sx0r4k0") for k in range(50)]
    assert privacy_gate("f1", rows, CELL, k_min=2).suppressed


def test_export_choropleth():
    results = [f1_avg_over_individuals([tp("a", 1, c)], c) for c in ("sx0r4k", "sx0r4m", "sx0r")]
    results.append(AggregateResult("sx0r4q", "f1", "daily_steps", suppressed=True, reason="too few"))
    doc = export_choropleth(results, "demo")
    validate_geojson(doc)
    assert len(doc["features"]) == 3
    for f in doc["features"]:
        box = decode(f["properties"]["cell"])
        ring = f["geometry"]["coordinates"][0]
        assert ring[0] == ring[-1]
        assert {(lon, lat) for lon, lat in ring} == {(box.min_lon, box.min_lat), (box.max_lon, box.min_lat),
                                                     (box.max_lon, box.max_lat), (box.min_lon, box.max_lat)}
    assert "sx0r4q" not in json.dumps(doc)


def test_validate_geojson_rejects_clockwise_ring():
    doc = export_choropleth([f1_avg_over_individuals([tp("a", 1)], CELL)])
    ring = doc["features"][0]["geometry"]["coordinates"][0]
    doc["features"][0]["geometry"]["coordinates"][0] = ring[::-1]
    with pytest.raises(ValueError):
        validate_geojson(doc)


def test_build_tuples_modes_and_time_keys():
    cat = IndicatorCatalog.default()
    t = 1_568_023_200_000  # 2019-09-09 10:00 UTC
    values = [IndicatorValue("a", "steps", t, t + 60_000, 80, 0.9, "sx0r4k0"),
              IndicatorValue("a", "daily_steps", t, t + 86_400_000, 9000, 1.0),
              IndicatorValue("b", "steps", t, t + 60_000, 10, 1.0, None)]
    res = build_tuples(values, cat, "resources", "UTC")
    assert [(x.u, x.g, x.t) for x in res] == [("a", "sx0r4k0", "20190909T10:00")]
    hab = build_tuples(values, cat, "habits", "UTC", homes={"a": "sx0r4kk"})
    assert {x.g for x in hab} == {"sx0r4kk"} and len(hab) == 2
    assert time_key(t, t + 86_400_000, "day", "UTC") == "20190909"
    with pytest.raises(ValueError):
        build_tuples(values, cat, "both", "UTC")


def test_tuple_store_round_trip(tmp_path):
    rng = random.Random(1)
    rows = [tp(rng.choice("abc"), rng.randrange(100), rng.choice(["sx0r4k0", "sx0r5bb", "u4pruyd"]),
               name=rng.choice(["daily_steps", "met"]), ts=rng.randrange(10**6)) for _ in range(60)]
    store = TupleStore(tmp_path)
    store.write(rows)
    assert store.indicators() == sorted({r.name for r in rows})
    for name in store.indicators():
        back = store.read(name, "resources")
        assert sorted(back, key=repr) == sorted([r for r in rows if r.name == name], key=repr)
        assert {r.g for r in store.read(name, "resources", "sx0r4")} <= {"sx0r4k0"}
    assert store.read("daily_steps", "habits") == []


# --- properties ----------------------------------------------------------------

cells = st.sampled_from(["sx0r4k0", "sx0r4k1", "sx0r4m0", "sx0r5b2", "sx0q000", "u4pruyd"])
tuple_rows = st.lists(st.tuples(st.sampled_from("abcdefgh"), cells, st.integers(0, 10_000)), min_size=1,
                      max_size=40)


def _tuples(rows):
    return [tp(u, v, g, ts=k) for k, (u, g, v) in enumerate(rows)]


@settings(max_examples=60, deadline=None)
@given(tuple_rows, st.randoms())
def test_functions_are_order_invariant(rows, rnd):
    a = _tuples(rows)
    b = list(a)
    rnd.shuffle(b)
    for fn, kw in ((f1_avg_over_individuals, {}), (f2_weighted_avg, {}),
                   (f3_distribution, {"bins": [0, 2500, 5000, 10_000]}), (f4_fraction_below, {"threshold": 4000})):
        for cell in ("sx0r", "sx0r4k"):
            assert fn(a, cell, **kw).to_dict() == fn(b, cell, **kw).to_dict()


@settings(max_examples=60, deadline=None)
@given(tuple_rows)
def test_f3_sums_to_one_and_f4_monotone(rows):
    t = _tuples(rows)
    r = f3_distribution(t, "sx0", bins=[0, 2500, 5000, 7500, 10_000])
    if not r.suppressed:
        assert sum(r.value) == pytest.approx(1.0)
    prev = -1.0
    for thr in (0, 1000, 4000, 9000, 10_000):
        res = f4_fraction_below(t, "sx0", thr)
        if res.suppressed:
            break
        assert res.value >= prev
        prev = res.value


@given(st.lists(st.lists(st.integers(0, 100), min_size=3, max_size=3), min_size=1, max_size=8))
def test_f1_equals_f2_for_equal_counts(per_user):
    rows = [tp(f"u{k}", v) for k, vals in enumerate(per_user) for v in vals]
    assert f1_avg_over_individuals(rows, CELL).value == pytest.approx(f2_weighted_avg(rows, CELL).value)


@settings(max_examples=60, deadline=None)
@given(tuple_rows, st.integers(2, 5))
def test_aggregate_cells_matches_per_cell_gate(rows, k_min):
    t = _tuples(rows)
    bulk = {json.dumps(r.to_dict(), sort_keys=True) for r in aggregate_cells("f1", t, 7, k_min=k_min, min_len=4)}
    single = set()
    for c in sorted({x.g for x in t}):
        d = privacy_gate("f1", t, c, k_min=k_min, min_len=4).to_dict()
        d.pop("requested")
        single.add(json.dumps(d, sort_keys=True))
    assert bulk == single
    for r in aggregate_cells("f1", t, 7, k_min=k_min, min_len=4):
        if not r.suppressed:
            assert r.n_participants >= k_min
