from datetime import date

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import signal

from geobehave.indicators.activity import (
    INTENSITY_CLASSES,
    CountParams,
    activity_counts,
    classify_activity,
    classify_counts,
    met_from_counts,
)
from geobehave.indicators.sleep import detect_sleep
from geobehave.indicators.steps import count_steps
from geobehave.ingest.generate import synth_segment
from geobehave.ingest.records import AccelSegment, SensorStream
from geobehave.timeutil import MS_PER_MIN, local_ms

T0 = 1_568_000_040_000 - 1_568_000_040_000 % MS_PER_MIN  # minute aligned


def _segment(vm, rate, t0=T0):
    t = t0 + np.round(np.arange(len(vm)) * 1000.0 / rate).astype(np.int64)
    return AccelSegment(t, np.column_stack([np.zeros_like(vm), np.zeros_like(vm), vm]), rate)


def reference_counts(vm, rate, t0=T0, p=CountParams()):
    """Epoch summation written from the textbook recipe: band-pass (transfer
    function form), rectify, sum per minute, scale to counts."""
    b, a = signal.butter(p.order, [p.low_hz, p.high_hz], btype="bandpass", fs=rate)
    x = np.abs(signal.filtfilt(b, a, vm - 1.0, padlen=3 * (2 * p.order + 1)))
    x[x < p.deadband_g] = 0.0
    per_min = int(rate * 60)
    return np.array([round(x[k:k + per_min].sum() * p.gain / rate) for k in range(0, len(x), per_min)])


def test_stationary_gives_zero_counts_and_steps():
    seg = _segment(np.ones(10 * 600), 10.0)
    c = activity_counts(seg)
    assert len(c) == 10 and (c.values == 0).all()
    assert (count_steps(seg).values == 0).all()


def test_sinusoid_matches_reference():
    rate = 10.0
    tt = np.arange(10 * 600) / rate
    vm = 1.0 + 0.5 * np.sin(2 * np.pi * 2.0 * tt)
    got = activity_counts(_segment(vm, rate)).values
    ref = reference_counts(vm, rate)
    assert len(got) == 10
    assert np.all(np.abs(got - ref) <= np.maximum(2, 1e-3 * ref))
    assert got.min() > 2000  # a brisk 2 Hz oscillation is well above light


def test_partial_minutes_and_gaps_are_omitted():
    rate = 10.0
    vm = np.ones(int(5.5 * 600))
    seg = _segment(vm, rate)
    assert len(activity_counts(seg)) == 5
    t = np.concatenate([seg.t[:1800], seg.t[1800:] + 20 * MS_PER_MIN])
    stream = SensorStream("p", [AccelSegment(t, seg.xyz, rate)])
    c = activity_counts(stream)
    in_gap = (c.minute >= T0 + 3 * MS_PER_MIN) & (c.minute < T0 + 23 * MS_PER_MIN)
    assert not in_gap.any()


def test_low_rate_is_flagged_not_failed():
    seg = _segment(np.ones(4 * 60 * 3), 4.0)
    res = activity_counts(seg)
    assert res.low_quality and len(res) == 3


def test_classification_and_met():
    labels, met = classify_activity(np.array([0, 99, 100, 1999, 2000, 5998, 5999, 6000, 9000]))
    assert list(labels) == ["sedentary", "sedentary", "light", "light", "moderate", "moderate", "moderate",
                            "vigorous", "vigorous"]
    assert met[0] == 1.0 and met[7] == pytest.approx(6.0)
    assert (met >= 1.0).all()


@given(st.lists(st.integers(0, 20_000), min_size=1, max_size=200))
def test_classification_monotone_and_partitions(counts):
    c = np.sort(np.array(counts))
    cls = classify_counts(c)
    assert (np.diff(cls) >= 0).all()
    assert (np.diff(met_from_counts(c)) >= 0).all()
    labels, _ = classify_activity(np.array(counts))
    assert sum(int((labels == k).sum()) for k in INTENSITY_CLASSES) == len(counts)


def test_planted_vigorous_block():
    seg, _ = synth_segment(["sedentary"] * 5 + ["vigorous"] * 30 + ["sedentary"] * 5, T0, 10.0, seed=1)
    counts = activity_counts(seg)
    labels, _ = classify_activity(counts)
    block = (counts.minute >= T0 + 5 * MS_PER_MIN) & (counts.minute < T0 + 35 * MS_PER_MIN)
    share = np.isin(labels[block], ["moderate", "vigorous"]).mean()
    assert share >= 0.9


def test_planted_vigorous_runs_in_cohort(mini_cohort):
    streams, _, gt = mini_cohort
    hit = total = 0
    for pid, s in streams.items():
        counts = activity_counts(s)
        labels, _ = classify_activity(counts)
        for a, b, lab in gt.intensity[pid]:
            if lab != "vigorous":
                continue
            m = (counts.minute >= a) & (counts.minute < b)
            hit += int(np.isin(labels[m], ["moderate", "vigorous"]).sum())
            total += int(m.sum())
    assert total > 100
    assert hit / total >= 0.9


@pytest.mark.parametrize("rate", [10.0, 20.0, 25.0])
def test_gait_steps_and_amplitude_robustness(rate):
    seg, planted = synth_segment(["moderate"], T0, rate, seed=3)
    n = int(count_steps(seg).values.sum())
    assert abs(n - 108) <= 10
    assert abs(n - planted.sum()) <= 3
    big, _ = synth_segment(["moderate"], T0, rate, seed=3, amplitude_scale=2.0)
    assert abs(int(count_steps(big).values.sum()) - n) <= 0.05 * n


def _night_stream(labels_by_minute, night=date(2019, 9, 10), tz="UTC", seed=0):
    t0 = local_ms(night, "20:00", tz)
    seg, _ = synth_segment(labels_by_minute, t0, 10.0, seed=seed)
    return SensorStream("p", [seg], timezone=tz)


def test_planted_sleep_window():
    labels = ["light"] * 180 + ["sleep"] * 480 + ["light"] * 300
    res = detect_sleep(_night_stream(labels), date(2019, 9, 10))
    assert res.hours == pytest.approx(8.0, abs=0.5)
    assert res.interruptions == 0
    assert res.sleep_start == local_ms(date(2019, 9, 10), "23:00", "UTC")


def test_night_bout_is_one_interruption():
    labels = ["light"] * 180 + ["sleep"] * 240 + ["moderate"] * 30 + ["sleep"] * 210 + ["light"] * 300
    res = detect_sleep(_night_stream(labels, seed=2), date(2019, 9, 10))
    assert res.interruptions == 1
    assert res.hours == pytest.approx(7.5, abs=0.5)


def test_short_movement_is_tolerated():
    labels = ["light"] * 180 + ["sleep"] * 240 + ["moderate"] * 3 + ["sleep"] * 237 + ["light"] * 300
    res = detect_sleep(_night_stream(labels, seed=4), date(2019, 9, 10))
    assert res.interruptions == 0
    assert res.hours == pytest.approx(8.0, abs=0.5)


def test_fully_active_night():
    res = detect_sleep(_night_stream(["light"] * 960), date(2019, 9, 10))
    assert res.hours == 0.0 and res.sleep_start is None


def test_missing_night_is_flagged():
    res = detect_sleep(_night_stream(["light"] * 120), date(2019, 9, 10))
    assert res.quality_flag == pytest.approx(0.2)
    assert res.available_hours == pytest.approx(2.0, abs=0.05)
