import json
from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geobehave.ingest.availability import compute_availability
from geobehave.ingest.generate import GeneratorSpecError, generate_cohort
from geobehave.ingest.parse import load_stream, parse_stream, read_accel_npz, write_accel_npz, write_jsonl
from geobehave.ingest.records import (
    AccelSegment,
    Participant,
    RecordError,
    SensorStream,
    StreamError,
    find_gaps,
)
from geobehave.mobility.stops import detect_stops
from geobehave.timeutil import MS_PER_MIN, day_bounds

from conftest import mini_spec

T0 = 1_568_000_000_000


def _write(tmp_path, rows, name="s.jsonl"):
    p = tmp_path / name
    p.write_text("\n".join(r if isinstance(r, str) else json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return p


def test_three_record_file(tmp_path):
    p = _write(tmp_path, [
        {"pid": "p1", "t": T0, "kind": "accel", "x": 0, "y": 0, "z": 1, "rate_hz": 10},
        {"pid": "p1", "t": T0 + 100, "kind": "gps", "lat": 40.6, "lon": 22.9},
        {"pid": "p1", "t": T0 + 200, "kind": "report", "report_kind": "meal", "meal_type": "lunch"},
    ])
    res = parse_stream(p)
    assert res.n_records == 3 and res.n_rejected == 0
    s = res.stream
    assert (s.n_accel, len(s.gps), len(s.reports), s.gaps) == (1, 1, 1, [])


def test_ten_minute_gap(tmp_path):
    p = _write(tmp_path, [{"pid": "p", "t": T0 + k * 10 * MS_PER_MIN, "kind": "accel", "x": 0, "y": 0, "z": 1}
                          for k in range(2)])
    gaps = parse_stream(p).stream.gaps
    assert gaps == [(T0, T0 + 10 * MS_PER_MIN)]


def test_bad_rows_rejected_with_line_numbers(tmp_path):
    p = _write(tmp_path, [
        {"pid": "p", "t": T0, "kind": "gps", "lat": 40.0, "lon": 22.0},
        {"pid": "p", "t": T0 + 1000, "kind": "gps", "lat": 95.0, "lon": 22.0},
        {"pid": "p", "t": T0 + 2000, "kind": "gps", "lat": 40.0, "lon": 22.0},
        {"pid": "p", "t": T0 + 500, "kind": "gps", "lat": 40.0, "lon": 22.0},
        {"pid": "p", "t": T0 + 3000, "kind": "gps", "lat": 40.0, "lon": 22.0},
    ])
    res = parse_stream(p)
    assert [r.line for r in res.rejects] == [2, 4]
    assert len(res.stream.gps) == 3


def test_mostly_bad_file_is_stream_error(tmp_path):
    p = _write(tmp_path, ["{not json", "also bad", {"pid": "p", "t": T0, "kind": "gps", "lat": 1, "lon": 1}])
    with pytest.raises(StreamError):
        parse_stream(p)


def test_csv_accel(tmp_path):
    p = tmp_path / "a.csv"
    rows = ["pid,t,x,y,z,rate_hz"] + [f"p,{T0 + 100 * k},0,0,1,10" for k in range(20)] + ["p,oops,0,0,1,10"]
    p.write_text("\n".join(rows) + "\n", encoding="utf-8")
    res = parse_stream(p)
    assert res.stream.n_accel == 20 and res.n_rejected == 1


def test_participant_refuses_identifiers():
    with pytest.raises(RecordError):
        Participant("jane.doe@example.com")
    with pytest.raises(RecordError):
        Participant.from_dict({"id": "rc-1", "name": "Jane"})
    with pytest.raises(RecordError):
        Participant("")


def test_accel_magnitude_limit():
    with pytest.raises(RecordError):
        SensorStream("p", [AccelSegment(np.array([0, 100]), np.array([[0, 0, 1], [0, 0, 17.0]]), 10)])


def test_availability_continuous_and_gap():
    day = date(2019, 9, 10)
    lo, _ = day_bounds(day, "UTC")
    rate = 20.0
    t = lo + np.arange(int(6 * 3600 * rate)) * 50
    seg = AccelSegment(t, np.tile([0.0, 0.0, 1.0], (len(t), 1)), rate)
    a = compute_availability(SensorStream("p", [seg]), day)
    assert a["accel_hours"] == pytest.approx(6.0, abs=0.01)
    assert compute_availability(SensorStream("p"), day) == {"accel_hours": 0.0, "gps_hours": 0.0}

    # 8 h window with the middle 2 h unrecorded
    t8 = lo + np.arange(int(8 * 3600 * rate)) * 50
    keep = (t8 < lo + 3 * 3_600_000) | (t8 >= lo + 5 * 3_600_000)
    seg8 = AccelSegment(t8[keep], np.tile([0.0, 0.0, 1.0], (int(keep.sum()), 1)), rate)
    assert compute_availability(SensorStream("p", [seg8]), day)["accel_hours"] == pytest.approx(6.0, abs=0.01)


def test_npz_round_trip(tmp_path, mini_cohort):
    streams, _, _ = mini_cohort
    s = next(iter(streams.values()))
    write_accel_npz(s.accel, tmp_path / "a.npz")
    back = read_accel_npz(tmp_path / "a.npz")
    assert len(back) == len(s.accel)
    for a, b in zip(s.accel, back):
        assert np.array_equal(a.t, b.t) and a.rate_hz == b.rate_hz
        assert np.max(np.abs(a.xyz - b.xyz)) <= 0.0005 + 1e-6


def test_jsonl_round_trip(tmp_path, mini_cohort):
    streams, _, _ = mini_cohort
    s = next(iter(streams.values()))
    write_jsonl(s, tmp_path / "s.jsonl", include_accel=False)
    write_accel_npz(s.accel, tmp_path / "s.npz")
    back = load_stream(tmp_path / "s.jsonl", tmp_path / "s.npz", s.timezone).stream
    assert back.participant == s.participant
    assert [(g.t, g.lat, g.lon) for g in back.gps] == [(g.t, g.lat, g.lon) for g in s.gps]
    assert [r.to_dict() for r in back.reports] == [r.to_dict() for r in s.reports]
    assert back.gaps == s.gaps


def test_generator_deterministic(tmp_path):
    spec = mini_spec(n_days=2, n_participants=2)
    outs = []
    for k in range(2):
        streams, _, gt = generate_cohort(spec, 5)
        d = tmp_path / str(k)
        d.mkdir()
        for pid, s in streams.items():
            write_jsonl(s, d / f"{pid}.jsonl", include_accel=False)
            write_accel_npz(s.accel, d / f"{pid}.npz")
        outs.append({p.name: p.read_bytes() for p in d.iterdir()} | {"gt": json.dumps(gt.to_dict(), sort_keys=True)})
    assert outs[0] == outs[1]
    other, _, _ = generate_cohort(spec, 6)
    assert [g.lat for g in other[spec["participants"][0]["id"]].gps] != \
        [g.lat for g in generate_cohort(spec, 5)[0][spec["participants"][0]["id"]].gps]


def test_zero_doze_rate_gives_no_gaps():
    spec = mini_spec(n_days=2, n_participants=2, doze={"rate_per_day": 0.0, "min_minutes": 10, "max_minutes": 20})
    streams, _, gt = generate_cohort(spec, 1)
    for pid, s in streams.items():
        assert s.gaps == [] and gt.gaps[pid] == []


def test_doze_gaps_are_recorded(mini_cohort):
    streams, _, gt = mini_cohort
    n = 0
    for pid, s in streams.items():
        planted = [tuple(g) for g in gt.gaps[pid]]
        for a, b in planted:
            assert any(c <= a + 1000 and d >= b - 1000 for c, d in s.gaps)
        for c, d in s.gaps:
            assert any(c <= b and d >= a for a, b in planted)
        n += len(planted)
    assert n > 0


def test_home_school_schedule_transition_matrix():
    spec = mini_spec(n_days=10, n_participants=1)
    spec["calendar"] = dict(spec["calendar"], weekdays=list(range(7)))
    spec["participants"][0] = dict(spec["participants"][0], school_day=[{"template": "school_home", "p": 1.0}])
    _, _, gt = generate_cohort(spec, 3)
    P = gt.transition_matrix(spec["participants"][0]["id"], "school")
    assert P["home"] == {"school": 1.0}
    assert P["school"] == {"home": 1.0}


def test_overlapping_blocks_are_a_spec_error():
    spec = mini_spec(n_days=1, n_participants=1)
    spec["templates"]["bad"] = [{"place": "school", "start": "08:15", "end": "14:00"},
                                {"place": "park_a", "start": "13:00", "end": "15:00"}]
    spec["participants"][0]["school_day"] = [{"template": "bad", "p": 1.0}]
    with pytest.raises(GeneratorSpecError):
        generate_cohort(spec, 1)


def test_planted_stops_replay(mini_cohort):
    """Replaying planted stays through stop detection gives the planted count."""
    streams, _, gt = mini_cohort
    for pid, s in streams.items():
        t, lat, lon = s.gps_arrays()
        planted = []
        for st_ in sorted(gt.stops[pid], key=lambda x: x["start"]):
            if planted and planted[-1]["place"] == st_["place"] and st_["start"] - planted[-1]["end"] <= MS_PER_MIN:
                planted[-1] = dict(planted[-1], end=st_["end"])
            else:
                planted.append(dict(st_))
        long_enough = [p for p in planted if p["end"] - p["start"] >= 10 * MS_PER_MIN]
        assert len(detect_stops(t, lat, lon)) == len(long_enough)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.floats(-100, 100), st.sampled_from(["gps", "accel", "junk"])),
                min_size=1, max_size=30))
def test_parser_never_emits_invalid_stream(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("fuzz") / "f.jsonl"
    lines = []
    t = T0
    for dt, v, kind in rows:
        t += dt * 1000
        if kind == "gps":
            lines.append(json.dumps({"pid": "p", "t": t, "kind": "gps", "lat": v, "lon": v * 2}))
        elif kind == "accel":
            lines.append(json.dumps({"pid": "p", "t": t, "kind": "accel", "x": v / 5, "y": 0, "z": 1}))
        else:
            lines.append("{" + str(v))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    try:
        s = parse_stream(path).stream
    except StreamError:
        return
    s.validate()
    at = s.accel_t()
    assert np.all(np.diff(at) > 0)
    assert all(b.t > a.t for a, b in zip(s.gps, s.gps[1:]))
    assert all(-90 <= g.lat <= 90 and -180 <= g.lon <= 180 for g in s.gps)
    assert s.gaps == find_gaps(at)
