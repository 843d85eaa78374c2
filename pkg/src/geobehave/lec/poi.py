"""POIs, the source-to-internal taxonomy mapping and GeoJSON snapshots."""
from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from ..geocell import encode, validate_point

log = logging.getLogger(__name__)

SOURCES = ("osm", "foursquare", "gmaps", "other")
OTHER = "other"
GENERIC = "*"


@dataclass(frozen=True)
class POI:
    lat: float
    lon: float
    source: str
    raw_category: str
    category: str = OTHER
    id: str = ""

    def __post_init__(self):
        validate_point(self.lat, self.lon)

    @property
    def code(self) -> str:
        return encode(self.lat, self.lon, 12)


@dataclass
class TaxonomyMap:
    """(source, raw category) -> internal category.

    A per-source entry takes precedence over a generic ``*`` entry for the
    same raw string. Anything unmapped becomes ``other`` and is counted.
    """

    table: dict = field(default_factory=dict)
    unmapped: Counter = field(default_factory=Counter)

    def map(self, source: str, raw_category: str) -> str:
        key = raw_category.strip()
        cat = self.table.get((source, key))
        if cat is None:
            cat = self.table.get((GENERIC, key))
        if cat is None:
            self.unmapped[(source, key)] += 1
            return OTHER
        return cat

    @property
    def categories(self) -> list[str]:
        return sorted(set(self.table.values()) | {OTHER})

    @classmethod
    def from_rows(cls, rows) -> "TaxonomyMap":
        table = {}
        for r in rows:
            key = (r["source"].strip(), r["raw_category"].strip())
            if key in table and table[key] != r["category"].strip():
                raise ValueError(f"conflicting mapping for {key}")
            table[key] = r["category"].strip()
        return cls(table)

    @classmethod
    def load(cls, path=None) -> "TaxonomyMap":
        """Mapping CSV with columns ``source,raw_category,category``; the
        bundled table when no path is given."""
        if path is None:
            text = resources.files("geobehave.data").joinpath("taxonomy.csv").read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls.from_rows(csv.DictReader(text.splitlines()))


def map_taxonomy(source: str, raw_category: str, taxonomy: TaxonomyMap | None = None) -> str:
    return (taxonomy or default_taxonomy()).map(source, raw_category)


@lru_cache(maxsize=1)
def _bundled_table() -> tuple:
    return tuple(TaxonomyMap.load().table.items())


def default_taxonomy() -> TaxonomyMap:
    """A fresh map (with its own unmapped counter) over the bundled table."""
    return TaxonomyMap(dict(_bundled_table()))


def make_poi(lat, lon, source, raw_category, taxonomy: TaxonomyMap | None = None, id: str = "") -> POI:
    return POI(float(lat), float(lon), source, raw_category, map_taxonomy(source, raw_category, taxonomy), id)


def load_snapshot(path, taxonomy: TaxonomyMap | None = None) -> list[POI]:
    """POIs from a GeoJSON FeatureCollection of Point features carrying
    ``source`` and ``raw_category`` properties."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise ValueError("POI snapshot must be a GeoJSON FeatureCollection")
    tax = taxonomy or default_taxonomy()
    out = []
    for k, feat in enumerate(doc.get("features", [])):
        geom = feat.get("geometry") or {}
        if geom.get("type") != "Point":
            raise ValueError(f"feature {k}: only Point geometries are supported")
        lon, lat = geom["coordinates"][:2]
        props = feat.get("properties") or {}
        out.append(make_poi(lat, lon, props.get("source", OTHER), str(props.get("raw_category", "")),
                            tax, str(props.get("id", feat.get("id", "")))))
    if tax.unmapped:
        log.info("%d POIs with unmapped categories", sum(tax.unmapped.values()))
    return out


def snapshot_document(pois) -> dict:
    feats = []
    for p in pois:
        feat = {"type": "Feature", "geometry": {"type": "Point", "coordinates": [p.lon, p.lat]},
                "properties": {"id": p.id, "source": p.source, "raw_category": p.raw_category}}
        if p.id:
            feat["id"] = p.id
        feats.append(feat)
    return {"type": "FeatureCollection", "features": feats}


def write_snapshot(pois, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(snapshot_document(pois), fh, indent=1, sort_keys=True)
        fh.write("\n")
