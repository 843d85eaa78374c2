"""Local extrinsic conditions per geocell.

Urban-environment LECs come from a POI snapshot: availability and counts
per category, densities per km², counts within a radius, the recreation
facility-type distribution and the open-space share of the neighbourhood.
Socioeconomic LECs are joined from a statistics table keyed by region.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from ..geocell import cell_area_km2, center, haversine_m, validate_code
from ..quality import QualityConfig, intersect_all, source_quality
from .poi import POI

log = logging.getLogger(__name__)

MIN_CELL_LEN = 4
NEIGHBOURHOOD_LEN = 6
RADII_M = (100, 1000)

FOOD_OUTLETS = ("supermarket", "restaurant", "fast_food", "cafe_bar", "liquor_store", "bakery")
RECREATION = ("park", "indoor_recreation", "outdoor_recreation")
OPEN_SPACE = ("park", "outdoor_recreation")
AVAILABILITY = ("supermarket", "restaurant", "fast_food", "cafe_bar", "liquor_store", "park",
                "indoor_recreation", "outdoor_recreation")
GROUPS = {"food_outlets": FOOD_OUTLETS, "recreation": RECREATION}


@dataclass(frozen=True)
class LecValue:
    cell: str
    name: str
    value: object
    quality: float = 1.0

    def to_row(self) -> dict:
        return {"cell": self.cell, "name": self.name, "value": self.value, "quality": self.quality}

    @classmethod
    def from_row(cls, row: dict) -> "LecValue":
        return cls(row["cell"], row["name"], row["value"], float(row.get("quality", 1.0)))


@dataclass(frozen=True)
class LecOmission:
    cell: str
    name: str
    reason: str

    def to_row(self) -> dict:
        return {"cell": self.cell, "name": self.name, "omitted": self.reason}


def _members(category: str) -> tuple:
    return GROUPS.get(category, (category,))


def count_within_radius(lat: float, lon: float, pois, category: str, radius_m: float) -> int:
    """POIs of a category (or group) within ``radius_m`` meters, boundary included."""
    if radius_m < 0:
        raise ValueError("radius must be nonnegative")
    cats = _members(category)
    return sum(1 for p in pois if p.category in cats and haversine_m(lat, lon, p.lat, p.lon) <= radius_m)


def _quality(pois, all_sources, cfg: QualityConfig) -> float:
    """Minimum source quality of the POIs behind a value; an empty result
    rests on every source of the snapshot."""
    sources = sorted({p.source for p in pois}) or sorted(all_sources)
    if not sources:
        return 1.0
    return round(intersect_all([source_quality(s, cfg.sources) for s in sources], cfg.norm).value, 6)


class PoiSet:
    """A snapshot with each POI's full-precision geocell code precomputed."""

    def __init__(self, pois):
        self.pois = list(pois)
        self.codes = [p.code for p in self.pois]
        self.sources = {p.source for p in self.pois}

    def in_cell(self, cell: str) -> list[POI]:
        return [p for p, c in zip(self.pois, self.codes) if c.startswith(cell)]

    def count(self, cell: str, category: str) -> int:
        cats = _members(category)
        return sum(1 for p, c in zip(self.pois, self.codes) if p.category in cats and c.startswith(cell))


def compute_cell_lecs(pois, cell: str, cfg: QualityConfig | None = None):
    """LEC values for one cell. Returns (values, omissions)."""
    cfg = cfg or QualityConfig()
    cell = validate_code(cell)
    if len(cell) < MIN_CELL_LEN:
        raise ValueError(f"cell {cell!r} shorter than {MIN_CELL_LEN} characters")
    ps = pois if isinstance(pois, PoiSet) else PoiSet(pois)
    inside = ps.in_cell(cell)
    area = cell_area_km2(cell)
    out, omit = [], []

    def add(name, value, used):
        out.append(LecValue(cell, name, value, _quality(used, ps.sources, cfg)))

    for cat in AVAILABILITY + tuple(GROUPS):
        used = [p for p in inside if p.category in _members(cat)]
        add(f"available_{cat}", bool(used), used)
        add(f"count_{cat}", len(used), used)
    for group in GROUPS:
        used = [p for p in inside if p.category in GROUPS[group]]
        add(f"density_{group}", len(used) / area, used)

    lat, lon = center(cell)
    for group in GROUPS:
        for r in RADII_M:
            used = [p for p in ps.pois if p.category in GROUPS[group] and haversine_m(lat, lon, p.lat, p.lon) <= r]
            add(f"{group}_within_{r}m", len(used), used)

    rec = [p for p in inside if p.category in RECREATION]
    if rec:
        c = Counter(p.category for p in rec)
        add("recreation_type_distribution", {k: c[k] / len(rec) for k in RECREATION if c[k]}, rec)
    else:
        omit.append(LecOmission(cell, "recreation_type_distribution", "no recreation facilities in cell"))

    hood = cell[:NEIGHBOURHOOD_LEN]
    around = ps.in_cell(hood)
    if around:
        open_ = [p for p in around if p.category in OPEN_SPACE]
        add("open_space_share", len(open_) / len(around), around)
    else:
        omit.append(LecOmission(cell, "open_space_share", f"no POIs in neighbourhood {hood}"))
    return out, omit


# --- statistical tables ---------------------------------------------------

EDU_PREFIX = "education_"


@dataclass
class StatTable:
    """Socioeconomic variables per region.

    ``rows`` maps a region key to its variables. A region key is either a
    geocell prefix or an administrative code listed in ``region_cells``
    (code -> cell prefixes covering it).
    """

    rows: dict
    region_cells: dict | None = None

    def __post_init__(self):
        for key, v in self.rows.items():
            u = v.get("unemployment_rate")
            if u is not None and not 0.0 <= u <= 100.0:
                raise ValueError(f"{key}: unemployment_rate {u} outside [0, 100]")
            dist = v.get("education_distribution")
            if dist is not None:
                total = math.fsum(dist.values())
                if abs(total - 1.0) > 1e-6 or any(x < 0 for x in dist.values()):
                    raise ValueError(f"{key}: education distribution does not sum to 1")
                v["education_distribution"] = {k: x / total for k, x in sorted(dist.items())}

    def prefixes(self) -> list[tuple[str, str]]:
        """(cell prefix, region key) pairs."""
        out = []
        for key in self.rows:
            if self.region_cells and key in self.region_cells:
                out.extend((validate_code(c), key) for c in self.region_cells[key])
            else:
                out.append((validate_code(key), key))
        return out

    @classmethod
    def from_csv(cls, path, region_map=None) -> "StatTable":
        """CSV with ``region,avg_income,unemployment_rate,education_<level>...``;
        optional region map CSV with ``region,cell``."""
        rows = {}
        with open(path, encoding="utf-8", newline="") as fh:
            for r in csv.DictReader(fh):
                key = r.pop("region").strip()
                v = {}
                if r.get("avg_income"):
                    v["avg_income"] = float(r.pop("avg_income"))
                if r.get("unemployment_rate"):
                    v["unemployment_rate"] = float(r.pop("unemployment_rate"))
                edu = {k[len(EDU_PREFIX):]: float(x) for k, x in r.items() if k.startswith(EDU_PREFIX) and x}
                if edu:
                    v["education_distribution"] = edu
                rows[key] = v
        cells = None
        if region_map is not None:
            cells = {}
            with open(region_map, encoding="utf-8", newline="") as fh:
                for r in csv.DictReader(fh):
                    cells.setdefault(r["region"].strip(), []).append(r["cell"].strip())
        return cls(rows, cells)

    def to_csv(self, path) -> None:
        levels = sorted({k for v in self.rows.values() for k in v.get("education_distribution", {})})
        cols = ["region", "avg_income", "unemployment_rate"] + [EDU_PREFIX + k for k in levels]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for key in sorted(self.rows):
                v = self.rows[key]
                dist = v.get("education_distribution", {})
                w.writerow([key, v.get("avg_income", ""), v.get("unemployment_rate", "")]
                           + [dist.get(k, "") for k in levels])


STAT_VARIABLES = ("avg_income", "unemployment_rate", "education_distribution")


def join_stats(cells, table: StatTable, cfg: QualityConfig | None = None):
    """Each cell inherits the variables of its smallest covering region.

    Returns (values, omissions); an uncovered cell yields one omission per
    variable and a log message.
    """
    cfg = cfg or QualityConfig()
    q = source_quality("official_statistics", cfg.sources).value
    prefixes = sorted(table.prefixes(), key=lambda pk: (-len(pk[0]), pk[0], pk[1]))
    out, omit = [], []
    for cell in sorted(set(cells)):
        match = next((key for pre, key in prefixes if cell.startswith(pre)), None)
        if match is None:
            log.info("cell %s is not covered by any statistics region", cell)
            omit.extend(LecOmission(cell, name, "no covering statistics region") for name in STAT_VARIABLES)
            continue
        v = table.rows[match]
        for name in STAT_VARIABLES:
            if name in v:
                out.append(LecValue(cell, name, v[name], q))
            else:
                omit.append(LecOmission(cell, name, f"region {match} has no {name}"))
    return out, omit


def write_lecs(values, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in values:
            fh.write(json.dumps(v.to_row(), sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def read_lecs(path) -> list[LecValue]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            row = json.loads(line)
            if "omitted" not in row:
                out.append(LecValue.from_row(row))
    return out
