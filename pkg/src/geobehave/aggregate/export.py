"""Choropleth export of aggregate results as GeoJSON."""
from __future__ import annotations

import json

from ..geocell import decode


def export_choropleth(results, title: str = "") -> dict:
    """One polygon feature per non-suppressed result, ordered by cell.

    Suppressed results are skipped and never serialized.
    """
    feats = []
    for r in sorted((r for r in results if not r.suppressed), key=lambda r: (r.cell, r.function, r.indicator)):
        box = decode(r.cell)
        ring = [[lon, lat] for lon, lat in box.corners()]
        props = {"cell": r.cell, "indicator": r.indicator, "function": r.function, "value": r.value,
                 "n_participants": r.n_participants, "quality": r.quality, "window": list(r.window)}
        if r.labels:
            props["labels"] = r.labels
        feats.append({"type": "Feature", "geometry": {"type": "Polygon", "coordinates": [ring]},
                      "properties": props})
    doc = {"type": "FeatureCollection", "features": feats}
    if title:
        doc["name"] = title
    return doc


def write_geojson(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def validate_geojson(doc: dict) -> None:
    """Structural checks for the FeatureCollection/Polygon subset we emit."""
    if doc.get("type") != "FeatureCollection" or not isinstance(doc.get("features"), list):
        raise ValueError("not a FeatureCollection")
    for k, f in enumerate(doc["features"]):
        if f.get("type") != "Feature" or not isinstance(f.get("properties"), dict):
            raise ValueError(f"feature {k}: malformed")
        g = f.get("geometry") or {}
        if g.get("type") != "Polygon":
            raise ValueError(f"feature {k}: geometry is not a Polygon")
        rings = g.get("coordinates")
        if not rings or not isinstance(rings, list):
            raise ValueError(f"feature {k}: no rings")
        for ring in rings:
            if len(ring) < 4 or ring[0] != ring[-1]:
                raise ValueError(f"feature {k}: ring not closed or too short")
            for pos in ring:
                if len(pos) < 2 or not (-180 <= pos[0] <= 180 and -90 <= pos[1] <= 90):
                    raise ValueError(f"feature {k}: position out of range")
            # exterior rings are counterclockwise (right-hand rule)
            area2 = sum(a[0] * b[1] - b[0] * a[1] for a, b in zip(ring, ring[1:]))
            if area2 <= 0:
                raise ValueError(f"feature {k}: exterior ring is not counterclockwise")
