"""Regenerate src/geobehave/data/cohort20.json (the bundled demo cohort spec)."""
import hashlib
import json
import math
from datetime import date
from pathlib import Path

import numpy as np

from geobehave.ingest.generate import GeneratorSpec, GeneratorSpecError, check_variant

rng = np.random.default_rng(20190909)


def offset(lat, lon, north_m, east_m):
    return (round(lat + north_m / 111_194.9, 6),
            round(lon + east_m / (111_194.9 * math.cos(math.radians(lat))), 6))


def dist(a, b):
    dy = (a[0] - b[0]) * 111_194.9
    dx = (a[1] - b[1]) * 111_194.9 * math.cos(math.radians(a[0]))
    return math.hypot(dx, dy)


places = [
    {"id": "school_a", "type": "school", "lat": 40.6300, "lon": 22.9450, "source": "osm", "raw_category": "amenity=school"},
    {"id": "school_b", "type": "school", "lat": 40.6180, "lon": 22.9680, "source": "osm", "raw_category": "amenity=school"},
    {"id": "park_a", "type": "park", "lat": 40.6335, "lon": 22.9400, "source": "osm", "raw_category": "leisure=park"},
    {"id": "park_b", "type": "park", "lat": 40.6150, "lon": 22.9720, "source": "foursquare", "raw_category": "Park"},
    {"id": "sports_1", "type": "indoor_recreation", "lat": 40.6240, "lon": 22.9560, "source": "osm", "raw_category": "leisure=sports_centre"},
    {"id": "fastfood_a", "type": "fast_food", "lat": 40.6285, "lon": 22.9490, "source": "osm", "raw_category": "amenity=fast_food"},
    {"id": "fastfood_b", "type": "fast_food", "lat": 40.6200, "lon": 22.9640, "source": "gmaps", "raw_category": "meal_takeaway"},
    {"id": "mall_food", "type": "fast_food", "lat": 40.6260, "lon": 22.9600, "source": "foursquare", "raw_category": "Fast Food Restaurant"},
]

raw_pool = [
    ("osm", "amenity=fast_food"), ("osm", "amenity=restaurant"), ("osm", "amenity=cafe"), ("osm", "amenity=bar"),
    ("osm", "shop=supermarket"), ("osm", "shop=convenience"), ("osm", "shop=alcohol"), ("osm", "leisure=park"),
    ("osm", "leisure=playground"), ("osm", "leisure=fitness_centre"), ("osm", "leisure=pitch"),
    ("foursquare", "Fast Food Restaurant"), ("foursquare", "Café"), ("foursquare", "Grocery Store"),
    ("gmaps", "restaurant"), ("gmaps", "meal_takeaway"), ("gmaps", "bakery"), ("gmaps", "gym"),
    ("osm", "shop=hairdresser"),
]
center = (40.6240, 22.9560)
homes_a_center, homes_b_center = offset(40.6300, 22.9450, 700, -500), offset(40.6180, 22.9680, -600, 700)

background = []
i = 0
while len(background) < 90:
    n, e = rng.uniform(-2500, 2500, 2)
    lat, lon = offset(*center, n, e)
    src, raw = raw_pool[int(rng.integers(len(raw_pool)))]
    # keep clear of neighbourhood home clusters so homes stay unmatched
    if min(dist((lat, lon), homes_a_center), dist((lat, lon), homes_b_center)) < 700:
        continue
    background.append({"id": f"bg_{i:03d}", "lat": lat, "lon": lon, "source": src, "raw_category": raw})
    i += 1

templates = {
    "school_home": [{"place": "school", "start": "08:15", "end": "14:00", "meals": [{"time": "11:30", "meal_type": "lunch", "food_category": "school_meal"}]}],
    "school_pe_home": [{"place": "school", "start": "08:15", "end": "14:00", "pe": ["10:00", "10:45"], "meals": [{"time": "11:30", "meal_type": "lunch", "food_category": "school_meal"}]}],
    "school_park": [{"place": "school", "start": "08:15", "end": "14:00", "meals": [{"time": "11:30", "meal_type": "lunch", "food_category": "school_meal"}]},
                    {"place": "home", "start": "14:40", "end": "16:30"},
                    {"place": "park_a", "start": "17:00", "end": "18:15", "mode": "walking"}],
    "school_park_b": [{"place": "school", "start": "08:15", "end": "14:00", "meals": [{"time": "11:30", "meal_type": "lunch", "food_category": "school_meal"}]},
                      {"place": "home", "start": "14:40", "end": "16:30"},
                      {"place": "park_b", "start": "17:00", "end": "18:15", "mode": "walking"}],
    "school_fastfood_a": [{"place": "school", "start": "08:15", "end": "14:00"},
                          {"place": "fastfood_a", "start": "14:10", "end": "14:50", "mode": "walking",
                           "meals": [{"time": "14:20", "meal_type": "lunch", "food_category": "fast_food"}]}],
    "school_fastfood_b": [{"place": "school", "start": "08:15", "end": "14:00"},
                          {"place": "fastfood_b", "start": "14:10", "end": "14:50", "mode": "walking",
                           "meals": [{"time": "14:20", "meal_type": "lunch", "food_category": "fast_food"}]}],
    "weekend_home": [],
    "weekend_park_a": [{"place": "park_a", "start": "10:30", "end": "12:00", "mode": "walking"}],
    "weekend_park_b": [{"place": "park_b", "start": "10:30", "end": "12:00", "mode": "walking"}],
    "weekend_sports": [{"place": "sports_1", "start": "11:00", "end": "12:30", "mode": "vehicle"},
                       {"place": "mall_food", "start": "13:00", "end": "13:45", "mode": "walking",
                        "meals": [{"time": "13:10", "meal_type": "lunch", "food_category": "fast_food"}]}],
}

participants = []
modes = ["walking"] * 14 + ["cycling"] * 3 + ["vehicle"] * 3
order = rng.permutation(20)
for k in range(20):
    group = "a" if k < 10 else "b"
    school = places[0] if group == "a" else places[1]
    mode = modes[int(order[k])]
    # commute distance tuned per mode: walkers 900-1500 m, others further
    if mode == "walking":
        d = rng.uniform(900, 1450)
    elif mode == "cycling":
        d = rng.uniform(1800, 2600)
    else:
        d = rng.uniform(2500, 3500)
    while True:
        ang = rng.uniform(0, 2 * math.pi)
        home = offset(school["lat"], school["lon"], d * math.cos(ang), d * math.sin(ang))
        pois = places + background
        if min(dist(home, (p["lat"], p["lon"])) for p in pois) > 200:
            break
    code = "rc-" + hashlib.sha256(f"cohort20-{k}".encode()).hexdigest()[:8]
    fastfood = "school_fastfood_a" if group == "a" else "school_fastfood_b"
    park = "school_park" if group == "a" else "school_park_b"
    wpark = "weekend_park_a" if group == "a" else "weekend_park_b"
    participants.append({
        "id": code,
        "age_band": "9-11" if k % 2 == 0 else "12-14",
        "gender": "f" if k % 3 else "m",
        "device_class": "smartwatch" if k % 2 == 0 else "smartphone",
        "home": list(home),
        "school": school["id"],
        "mode": mode,
        "sleep": {"bed": "22:30", "wake": "07:00", "jitter_min": 15},
        "school_day": [{"template": "school_home", "p": 0.4}, {"template": "school_pe_home", "p": 0.2},
                       {"template": park, "p": 0.25}, {"template": fastfood, "p": 0.15}],
        "non_school_day": [{"template": "weekend_home", "p": 0.3}, {"template": wpark, "p": 0.4},
                           {"template": "weekend_sports", "p": 0.3}],
        "home_meals": [{"time": "07:25", "meal_type": "breakfast", "food_category": "home_cooked"},
                       {"time": "20:00", "meal_type": "dinner", "food_category": "home_cooked"}],
        **({"night_activity": [{"night": "2019-09-12", "time": "03:00", "minutes": 30}]} if k % 5 == 0 else {}),
    })

spec = {
    "name": "cohort20",
    "start_date": "2019-09-09",
    "n_days": 14,
    "timezone": "Europe/Athens",
    "accel_rate_hz": 10,
    "gps_noise_m": 10,
    "doze": {"rate_per_day": 1.0, "min_minutes": 10, "max_minutes": 45},
    "speeds_kmh": {"walking": 4.5, "cycling": 13.0, "vehicle": 25.0},
    "calendar": {"id": "gr-2019-20", "school_start": "08:15", "school_end": "14:00", "weekdays": [0, 1, 2, 3, 4], "holidays": []},
    "places": places,
    "background_pois": background,
    "stat_regions": [
        {"key": "sx0r", "avg_income": 14200, "unemployment_rate": 18.5,
         "education_distribution": {"primary": 0.25, "secondary": 0.45, "tertiary": 0.30}},
        {"key": "sx0r4", "avg_income": 16800, "unemployment_rate": 12.0,
         "education_distribution": {"primary": 0.2, "secondary": 0.4, "tertiary": 0.4}},
    ],
    "templates": templates,
    "participants": participants,
}
# drop day variants a participant cannot fit (e.g. a walk too long for the gap)
for part in participants:
    for key, d in (("school_day", date(2019, 9, 9)), ("non_school_day", date(2019, 9, 14))):
        keep = []
        for v in part[key]:
            try:
                check_variant(GeneratorSpec(spec), part, v["template"], d)
                keep.append(v)
            except GeneratorSpecError as exc:
                print("dropped:", exc)
        total = sum(v["p"] for v in keep)
        part[key] = [{"template": v["template"], "p": round(v["p"] / total, 4)} for v in keep]

out = Path(__file__).resolve().parents[1] / "src" / "geobehave" / "data" / "cohort20.json"
out.write_text(json.dumps(spec, indent=1) + "\n")
print("wrote", out)
