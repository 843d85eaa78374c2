import logging

import pytest
from hypothesis import given
from hypothesis import strategies as st

from geobehave.quality import (
    LEVELS,
    T_CONORMS,
    T_NORMS,
    AvailabilityThresholds,
    QualityConfig,
    QualityError,
    QualityScore,
    availability_quality,
    combine_intersect,
    combine_union,
    intersect_all,
    quality_report,
    report_to_csv,
    source_quality,
    union_all,
)

unit = st.floats(0, 1, allow_nan=False)


def test_source_qualities(caplog):
    assert source_quality("smartwatch").value == 1.0
    assert source_quality("smartphone").value == 0.8
    assert source_quality("gmaps").value == 0.6
    with caplog.at_level(logging.WARNING):
        assert source_quality("pager").value == 0.6
    assert "pager" in caplog.text


def test_named_combinations():
    assert combine_intersect(0.5, 0.5, "product").value == 0.25
    assert combine_union(0.5, 0.5, "probabilistic_sum").value == 0.75
    assert combine_intersect(0.6, 0.8).value == 0.6
    assert combine_union(0.6, 0.8).value == 0.8
    assert combine_intersect(0.6, 0.3, "lukasiewicz").value == 0.0
    assert combine_union(0.6, 0.8, "bounded_sum").value == 1.0
    with pytest.raises(QualityError):
        combine_intersect(0.5, 0.5, "median")


def test_availability_mapping():
    th = AvailabilityThresholds(1.0, 6.0)
    assert availability_quality(0.0, th).value == 0.2
    assert availability_quality(1.0, th).value == 0.2
    assert availability_quality(3.5, th).value == pytest.approx(0.6)
    assert availability_quality(6.0, th).value == 1.0
    assert availability_quality(24.0, "accel_hours_per_day").value == 1.0
    with pytest.raises(QualityError):
        availability_quality(-1.0, th)
    with pytest.raises(QualityError):
        AvailabilityThresholds(5.0, 5.0)


def test_score_validation_and_levels():
    with pytest.raises(QualityError):
        QualityScore(1.2)
    assert QualityScore(0.79).level() == "high"
    assert QualityScore(0.5).level() == "moderate"  # ties go to the higher anchor
    assert {QualityScore(v).level() for v in LEVELS.values()} == set(LEVELS)


def test_folds_and_neutral_elements():
    assert intersect_all([]).value == 1.0
    assert union_all([]).value == 0.0
    assert intersect_all([1.0, 0.8, 0.6]).value == 0.6
    assert intersect_all([0.5, 0.5, 0.5], "product").value == pytest.approx(0.125)
    assert union_all([0.2, 0.4]).value == 0.4


def test_provenance_is_carried():
    q = combine_intersect(source_quality("gmaps"), availability_quality(3.0, "gps_hours_per_day"))
    kinds = [p[0] for p in q.provenance]
    assert kinds == ["source", "availability"]


def test_empty_report():
    assert quality_report({}) == {"rows": [], "regions": []}
    assert report_to_csv([]) == ""


def test_full_smartwatch_day():
    rep = quality_report({"days": [{"key": "p1", "day": "2019-09-09", "accel_hours": 20, "gps_hours": 12,
                                    "source": "smartwatch", "indicator": "steps"}]},
                         QualityConfig(indicator_accuracy={"steps": 1.0}))
    row = rep["rows"][0]
    assert row["combined"] == 1.0 and row["availability_quality"] == 1.0


def test_report_rows_sorted_and_bounded():
    days = [{"key": k, "day": d, "accel_hours": h, "gps_hours": h / 2, "source": s}
            for k, d, h, s in [("b", "2019-09-10", 3.0, "smartphone"), ("a", "2019-09-11", 0.5, "pager"),
                               ("a", "2019-09-09", 8.0, "smartwatch")]]
    rep = quality_report({"days": days, "regions": [{"key": "sx0r", "users": 55, "hours": 400}]})
    assert [(r["key"], r["day"]) for r in rep["rows"]] == [("a", "2019-09-09"), ("a", "2019-09-11"),
                                                           ("b", "2019-09-10")]
    for r in rep["rows"]:
        assert r["combined"] <= min(r["availability_quality"], r["source_quality"], r["indicator_accuracy"])
    assert rep["regions"][0]["users_quality"] == pytest.approx(0.6)
    assert rep["regions"][0]["combined"] == pytest.approx(0.6)
    csv_text = report_to_csv(rep["rows"])
    assert csv_text.splitlines()[0].startswith("scope,key,day")
    with pytest.raises(QualityError):
        quality_report({"days": [dict(days[0], accel_hours=-2)]})


def test_config_from_dict():
    cfg = QualityConfig.from_dict({"norm": "product", "sources": {"pager": 0.4},
                                   "thresholds": {"accel_hours_per_day": {"very_low": 2, "very_high": 10}}})
    assert cfg.norm == "product" and cfg.sources["pager"] == 0.4 and cfg.sources["osm"] == 0.8
    assert cfg.thresholds["accel_hours_per_day"].very_high == 10.0
    with pytest.raises(QualityError):
        QualityConfig.from_dict({"conorm": "xor"})
    with pytest.raises(QualityError):
        QualityConfig.from_dict({"sources": {"pager": 2}})


@given(st.floats(0, 50, allow_nan=False), st.floats(0, 50, allow_nan=False))
def test_availability_monotone(a, b):
    lo, hi = sorted((a, b))
    assert availability_quality(lo, "gps_hours_per_day").value <= availability_quality(hi, "gps_hours_per_day").value


@given(unit, unit, unit, st.sampled_from(sorted(T_NORMS)), st.sampled_from(sorted(T_CONORMS)))
def test_norm_axioms(a, b, c, norm, conorm):
    T = lambda x, y: combine_intersect(x, y, norm).value  # noqa: E731
    S = lambda x, y: combine_union(x, y, conorm).value  # noqa: E731
    assert T(a, 1.0) == pytest.approx(a) and S(a, 0.0) == pytest.approx(a)
    assert T(a, b) == pytest.approx(T(b, a)) and S(a, b) == pytest.approx(S(b, a))
    assert T(a, T(b, c)) == pytest.approx(T(T(a, b), c), abs=1e-12)
    assert S(a, S(b, c)) == pytest.approx(S(S(a, b), c), abs=1e-12)
    lo, hi = sorted((b, c))
    assert T(a, lo) <= T(a, hi) + 1e-12 and S(a, lo) <= S(a, hi) + 1e-12
    assert T(a, b) <= min(a, b) + 1e-12 and S(a, b) >= max(a, b) - 1e-12


@given(unit)
def test_min_max_idempotent(a):
    assert combine_intersect(a, a).value == a and combine_union(a, a).value == a


@given(st.lists(unit, min_size=1, max_size=10))
def test_min_fold_is_minimum(xs):
    assert intersect_all(xs).value == min(xs)
    assert union_all(xs).value == max(xs)
