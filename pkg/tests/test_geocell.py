import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geobehave.geocell import (
    BASE32,
    GeocellError,
    cell_area_km2,
    children,
    coarsen,
    decode,
    encode,
    encode_many,
    haversine_m,
    is_valid_code,
)

lats = st.floats(-90, 90, allow_nan=False)
lons = st.floats(-180, 180, allow_nan=False)
precisions = st.integers(1, 12)


def reference_geohash(lat, lon, precision):
    """Textbook bit-interleaving encoder written independently of the package."""
    bits = []
    lat_rng, lon_rng = [-90.0, 90.0], [-180.0, 180.0]
    for i in range(precision * 5):
        rng, v = (lon_rng, lon) if i % 2 == 0 else (lat_rng, lat)
        mid = (rng[0] + rng[1]) / 2
        if v >= mid:
            bits.append(1)
            rng[0] = mid
        else:
            bits.append(0)
            rng[1] = mid
    return "".join(BASE32[int("".join(map(str, bits[k:k + 5])), 2)] for k in range(0, len(bits), 5))


def test_known_code():
    assert encode(57.64911, 10.40744, 11) == "u4pruydqqvj"


def test_first_character_s_contains_point():
    box = decode("s")
    # "s" = 11000: lon bits 1,0,0 -> [0, 45); lat bits 1,0 -> [0, 45)
    assert (box.min_lat, box.max_lat, box.min_lon, box.max_lon) == (0.0, 45.0, 0.0, 45.0)
    assert box.contains(0.1, 0.1)


def test_coarsen_examples():
    assert coarsen("sx0r4k", 5) == "sx0r4"
    assert coarsen("sx0r4k", 6) == "sx0r4k"
    with pytest.raises(GeocellError):
        coarsen("sx0r4k", 7)


@pytest.mark.parametrize("lat,lon,k", [(95, 0, 5), (0, 181, 5), (float("nan"), 0, 5), (0, 0, 0), (0, 0, 13)])
def test_encode_rejects(lat, lon, k):
    with pytest.raises(GeocellError):
        encode(lat, lon, k)


def test_decode_rejects_bad_alphabet():
    for code in ("", "sx0a", "SX0", "u4pruydqqvjxx"):
        with pytest.raises(GeocellError):
            decode(code)


def test_boundary_points_go_to_upper_half():
    # 0.0 is the first midpoint of both axes; lower half-open puts it above
    assert encode(0.0, 0.0, 1) == "s"
    assert decode(encode(0.0, 0.0, 8)).min_lat == 0.0


def test_equator_cell_area():
    code = encode(0.01, 0.01, 5)
    box = decode(code)
    w = haversine_m(0, box.min_lon, 0, box.max_lon) / 1000
    h = haversine_m(box.min_lat, 0, box.max_lat, 0) / 1000
    assert cell_area_km2(code) == pytest.approx(w * h, rel=0.01)
    assert cell_area_km2(code) == pytest.approx(24.0, rel=0.1)


def test_area_translation_invariant():
    a = cell_area_km2(encode(40.6, 22.9, 6))
    b = cell_area_km2(encode(40.6, -100.3, 6))
    assert abs(a - b) / a < 1e-6


def test_encode_many_matches_scalar():
    rng = np.random.default_rng(0)
    lat = np.concatenate([rng.uniform(-90, 90, 500), [0.0, 45.0, -90.0, 90.0]])
    lon = np.concatenate([rng.uniform(-180, 180, 500), [0.0, 22.5, -180.0, 180.0]])
    for k in (1, 6, 12):
        assert encode_many(lat, lon, k) == [encode(a, b, k) for a, b in zip(lat, lon)]


@given(lats, lons, precisions)
def test_matches_reference_encoder(lat, lon, k):
    assert encode(lat, lon, k) == reference_geohash(lat, lon, k)


@given(lats, lons, precisions)
def test_round_trip_and_center(lat, lon, k):
    code = encode(lat, lon, k)
    assert is_valid_code(code) and len(code) == k
    box = decode(code)
    assert box.min_lat <= lat <= box.max_lat and box.min_lon <= lon <= box.max_lon
    assert encode(*box.center, k) == code


@given(lats, lons, precisions, precisions)
def test_prefix_hierarchy(lat, lon, j, k):
    j, k = min(j, k), max(j, k)
    assert encode(lat, lon, j) == coarsen(encode(lat, lon, k), j)


@given(lats, lons, st.integers(2, 12))
def test_coarsen_contains_and_area_grows(lat, lon, k):
    code = encode(lat, lon, k)
    parent = decode(coarsen(code, k - 1))
    assert parent.contains_box(decode(code))
    assert cell_area_km2(code[:-1]) > cell_area_km2(code)


@given(lats, lons, st.integers(1, 11))
def test_sides_halve_alternately(lat, lon, k):
    code = encode(lat, lon, k)
    a, b = decode(code), decode(encode(lat, lon, k + 1))
    # five bits per character: odd character positions split lon 3x, lat 2x
    lon_bits, lat_bits = (3, 2) if k % 2 == 0 else (2, 3)
    assert math.isclose(a.width / b.width, 2 ** lon_bits)
    assert math.isclose(a.height / b.height, 2 ** lat_bits)


def test_children_partition():
    kids = children("sx0r")
    assert len(kids) == 32 and all(k.startswith("sx0r") for k in kids)
    total = sum(cell_area_km2(k) for k in kids)
    assert total == pytest.approx(cell_area_km2("sx0r"), rel=1e-9)
