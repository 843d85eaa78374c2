"""Pipeline stages behind the command-line interface.

Every stage reads and writes under the configured output directory::

    inputs/     POI snapshot and statistics table (environment data)
    internal/   per-participant data: streams, indicators, timelines,
                profiles, tuples, participant-day quality
    public/     privacy-gated outputs: aggregates, choropleths, LECs,
                region quality report, run record

Nothing under ``public/`` carries a participant id or a raw coordinate.
"""
from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import __version__
from .aggregate.export import export_choropleth, validate_geojson, write_geojson
from .aggregate.functions import (ALL, AggregateResult, CellIndex, aggregate_cells, by_attribute,
                                  by_day_type)
from .aggregate.tuples import TupleStore, build_tuples
from .calendar import SchoolCalendar
from .config import AggregationRequest, RunConfig
from .indicators.catalog import IndicatorCatalog
from .indicators.derived import derive_indicators, window_of
from .indicators.extract import CellLocator, extract_base, transport_values
from .indicators.values import IndicatorValue, read_values, write_values
from .ingest.availability import compute_availability, stream_days
from .ingest.generate import GeneratorSpec, GroundTruth, iter_cohort
from .ingest.parse import load_stream, write_accel_npz, write_jsonl
from .ingest.records import Participant
from .lec.compute import PoiSet, StatTable, compute_cell_lecs, join_stats, write_lecs
from .lec.poi import TaxonomyMap, default_taxonomy, load_snapshot, make_poi, write_snapshot
from .mobility.poi import PoiIndex, infer_home
from .mobility.profile import profile_to_dot, profiles_for
from .mobility.timeline import build_timelines
from .mobility.types import Timeline
from .quality import quality_report, report_to_csv, report_to_json

log = logging.getLogger(__name__)

BUNDLED_SPEC = "cohort20.json"


class MissingPrerequisite(RuntimeError):
    """A stage's inputs are absent; ``command`` names the stage to run first."""

    def __init__(self, what: str, command: str):
        super().__init__(f"{what} not found; run `geobehave {command}` first")
        self.command = command


@dataclass(frozen=True)
class Layout:
    root: Path

    @property
    def inputs(self) -> Path:
        return self.root / "inputs"

    @property
    def internal(self) -> Path:
        return self.root / "internal"

    @property
    def public(self) -> Path:
        return self.root / "public"

    @property
    def streams(self) -> Path:
        return self.internal / "streams"

    @property
    def participants(self) -> Path:
        return self.internal / "participants.json"

    @property
    def calendar(self) -> Path:
        return self.internal / "calendar.json"

    @property
    def ground_truth(self) -> Path:
        return self.internal / "ground_truth.json"

    @property
    def manifest(self) -> Path:
        return self.internal / "ingest_manifest.json"

    @property
    def indicators(self) -> Path:
        return self.internal / "indicators"

    @property
    def homes(self) -> Path:
        return self.internal / "homes.json"

    @property
    def timelines(self) -> Path:
        return self.internal / "timelines"

    @property
    def profiles(self) -> Path:
        return self.internal / "profiles"

    @property
    def tuples(self) -> Path:
        return self.internal / "tuples"

    @property
    def poi_snapshot(self) -> Path:
        return self.inputs / "pois.geojson"

    @property
    def stat_table(self) -> Path:
        return self.inputs / "stats.csv"


def write_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_json(path: Path, what: str, command: str):
    if not path.exists():
        raise MissingPrerequisite(what, command)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# --- locating inputs -----------------------------------------------------------

def _streams_dir(cfg: RunConfig, lay: Layout) -> Path:
    return cfg.input_path("streams_dir") or lay.streams


def _participants(cfg: RunConfig, lay: Layout) -> list[Participant]:
    path = cfg.input_path("participants") or lay.participants
    return [Participant.from_dict(d) for d in read_json(path, "participant table", "generate")]


def _calendar(cfg: RunConfig, lay: Layout) -> SchoolCalendar:
    path = cfg.input_path("calendar") or lay.calendar
    if not path.exists():
        raise MissingPrerequisite("school calendar", "generate")
    return SchoolCalendar.load(path)


def _taxonomy(cfg: RunConfig) -> TaxonomyMap:
    path = cfg.input_path("taxonomy")
    return TaxonomyMap.load(path) if path else default_taxonomy()


def _pois(cfg: RunConfig, lay: Layout, taxonomy: TaxonomyMap):
    path = cfg.input_path("poi_snapshot") or lay.poi_snapshot
    if not path.exists():
        raise MissingPrerequisite("POI snapshot", "generate")
    return load_snapshot(path, taxonomy)


def _stream_paths(directory: Path, pid: str) -> tuple[Path, Path]:
    return directory / f"{pid}.jsonl", directory / f"{pid}.accel.npz"


def _load(cfg: RunConfig, lay: Layout, p: Participant):
    jsonl, npz = _stream_paths(_streams_dir(cfg, lay), p.id)
    if not jsonl.exists():
        raise MissingPrerequisite(f"stream file for {p.id}", "generate")
    return load_stream(jsonl, npz, p.timezone)


def generator_spec(cfg: RunConfig) -> GeneratorSpec:
    path = cfg.input_path("generator_spec")
    if path is not None:
        raw = json.loads(path.read_text(encoding="utf-8"))
    else:
        raw = json.loads(resources.files("geobehave.data").joinpath(BUNDLED_SPEC).read_text(encoding="utf-8"))
    return GeneratorSpec(raw)


# --- stages ------------------------------------------------------------------

def cmd_generate(cfg: RunConfig) -> dict:
    """Synthetic streams, participants, calendar and ground truth, plus the
    environment inputs (POI snapshot, statistics table) described by the spec."""
    lay = Layout(cfg.output_dir)
    spec = generator_spec(cfg)
    lay.streams.mkdir(parents=True, exist_ok=True)
    gt = GroundTruth(cfg.seed)
    participants = []
    for stream, participant in iter_cohort(spec, cfg.seed, gt):
        jsonl, npz = _stream_paths(lay.streams, participant.id)
        write_jsonl(stream, jsonl, include_accel=False)
        write_accel_npz(stream.accel, npz)
        participants.append(participant.to_dict())
        log.info("generated %s", participant.id)
    write_json(participants, lay.participants)
    write_json(spec.calendar_document(), lay.calendar)
    write_json(gt.to_dict(), lay.ground_truth)

    taxonomy = _taxonomy(cfg)
    pois = [make_poi(p["lat"], p["lon"], p.get("source", "osm"), p.get("raw_category", p.get("type", "")),
                     taxonomy, p["id"])
            for p in list(spec.raw.get("places", [])) + list(spec.raw.get("background_pois", []))]
    lay.inputs.mkdir(parents=True, exist_ok=True)
    write_snapshot(sorted(pois, key=lambda p: p.id), lay.poi_snapshot)
    regions = spec.raw.get("stat_regions", [])
    if regions:
        StatTable({r["key"]: {k: v for k, v in r.items() if k != "key"} for r in regions}).to_csv(lay.stat_table)
    return {"participants": len(participants), "pois": len(pois), "seed": cfg.seed}


def _ingest_record(p: Participant, res) -> dict:
    days = {d.isoformat(): {k: round(v, 6) for k, v in compute_availability(res.stream, d).items()}
            for d in stream_days(res.stream)}
    log.info("ingested %s: %d rejected records", p.id, res.n_rejected)
    return {"device_class": p.device_class, "rejected": res.n_rejected, "gps_fixes": len(res.stream.gps),
            "accel_samples": res.stream.n_accel, "reports": len(res.stream.reports), "days": days}


def _ingest_summary(manifest: dict) -> dict:
    return {"participants": len(manifest), "rejected": sum(m["rejected"] for m in manifest.values())}


def cmd_ingest(cfg: RunConfig) -> dict:
    """Validate every stream and record per-day availability."""
    lay = Layout(cfg.output_dir)
    manifest = {p.id: _ingest_record(p, _load(cfg, lay, p)) for p in _participants(cfg, lay)}
    write_json(manifest, lay.manifest)
    return _ingest_summary(manifest)


def _require_manifest(lay: Layout) -> dict:
    return read_json(lay.manifest, "ingest manifest", "ingest")


class _IndicatorWriter:
    """Per-participant indicator extraction; values land in
    ``indicators/<name>/<pid>.jsonl`` so consumers read only what they need."""

    def __init__(self, cfg: RunConfig, lay: Layout):
        self.cfg, self.lay = cfg, lay
        self.calendar = _calendar(cfg, lay)
        self.pois = PoiIndex.from_pois(_pois(cfg, lay, _taxonomy(cfg)))
        self.catalog = IndicatorCatalog.default(cfg.indicator_overrides)
        self.homes, self.index = {}, {}
        self.n_values = self.n_omitted = 0
        lay.timelines.mkdir(parents=True, exist_ok=True)
        (lay.internal / "omissions").mkdir(parents=True, exist_ok=True)

    def add(self, p: Participant, stream) -> None:
        cfg, lay = self.cfg, self.lay
        base = extract_base(stream, p, cfg=cfg.quality)
        t, lat, lon = stream.gps_arrays()
        home = infer_home(t, lat, lon, p.timezone)
        if home is not None:
            self.homes[p.id] = home.cell[:cfg.geocell_length]
        days = base.days
        timelines = build_timelines(t, lat, lon, p.id, p.timezone, self.pois, home, self.calendar,
                                    base.minutes, stream.reports, cfg.segmentation,
                                    days[0] if days else None, days[-1] if days else None)
        values = list(base.values)
        values.extend(transport_values(timelines, base.day_quality, CellLocator(t, lat, lon), cfg.quality))
        omitted = []
        if days:
            derived, omitted = derive_indicators(values, timelines, window_of(days), p.timezone, self.calendar,
                                                 cfg.quality)
            values.extend(derived)
        by_name = defaultdict(list)
        for v in values:
            by_name[v.name].append(v)
        counts = {}
        for name in sorted(by_name):
            rows = by_name[name]
            spec = self.catalog[name]
            distinct = {}
            for v in rows:
                key = json.dumps(v.value, sort_keys=True) if isinstance(v.value, (dict, list)) else v.value
                distinct.setdefault((type(v.value), key), v.value)
            for value in distinct.values():
                spec.check(value)
            rows.sort(key=IndicatorValue.sort_key)
            path = lay.indicators / name / f"{p.id}.jsonl"
            path.parent.mkdir(parents=True, exist_ok=True)
            counts[name] = write_values(rows, path)
        self.index[p.id] = counts
        self.n_values += len(values)
        self.n_omitted += write_values(omitted, lay.internal / "omissions" / f"{p.id}.jsonl")
        write_json([tl.to_dict() for tl in timelines], lay.timelines / f"{p.id}.json")
        log.info("%s: %d values, %d timelines", p.id, len(values), len(timelines))

    def finish(self) -> dict:
        write_json(self.homes, self.lay.homes)
        write_json(self.index, self.lay.indicators / "index.json")
        return {"values": self.n_values, "omitted": self.n_omitted, "homes": len(self.homes)}


def cmd_indicators(cfg: RunConfig) -> dict:
    """Base and derived indicators per participant.

    Timelines are segmented here as well, because commute and transport
    indicators depend on them; ``profile`` builds on the stored timelines.
    """
    lay = Layout(cfg.output_dir)
    manifest = _require_manifest(lay)
    writer = _IndicatorWriter(cfg, lay)
    for p in _participants(cfg, lay):
        if p.id not in manifest:
            raise MissingPrerequisite(f"ingest record for {p.id}", "ingest")
        writer.add(p, _load(cfg, lay, p).stream)
    return writer.finish()


def _timelines(lay: Layout, pid: str) -> list[Timeline]:
    path = lay.timelines / f"{pid}.json"
    return [Timeline.from_dict(d) for d in read_json(path, f"timelines of {pid}", "indicators")]


def cmd_profile(cfg: RunConfig) -> dict:
    """Behavior profiles (transition graphs with metadata) per participant and day type."""
    lay = Layout(cfg.output_dir)
    lay.profiles.mkdir(parents=True, exist_ok=True)
    n = 0
    for p in _participants(cfg, lay):
        for prof in profiles_for(_timelines(lay, p.id)):
            stem = lay.profiles / f"{p.id}.{prof.day_type}"
            write_json(prof.to_dict(), stem.with_suffix(".json"))
            stem.with_suffix(".dot").write_text(profile_to_dot(prof), encoding="utf-8")
            n += 1
    return {"profiles": n}


def cmd_lec(cfg: RunConfig) -> dict:
    """LECs for every cell of the configured length holding a POI."""
    lay = Layout(cfg.output_dir)
    pois = _pois(cfg, lay, _taxonomy(cfg))
    ps = PoiSet(pois)
    cells = sorted({c[:cfg.geocell_length] for c in ps.codes})
    values, omitted = [], []
    for cell in cells:
        v, o = compute_cell_lecs(ps, cell, cfg.quality)
        values.extend(v)
        omitted.extend(o)
    stats_path = cfg.input_path("stat_table") or lay.stat_table
    if stats_path.exists():
        table = StatTable.from_csv(stats_path, cfg.input_path("region_map"))
        v, o = join_stats(cells, table, cfg.quality)
        values.extend(v)
        omitted.extend(o)
    else:
        log.warning("no statistics table at %s; socioeconomic LECs skipped", stats_path)
    out = lay.public / "lec"
    out.mkdir(parents=True, exist_ok=True)
    write_lecs(sorted(values, key=lambda v: (v.cell, v.name)), out / "lecs.jsonl")
    write_lecs(sorted(omitted, key=lambda o: (o.cell, o.name)), out / "omitted.jsonl")
    return {"cells": len(cells), "values": len(values), "omitted": len(omitted)}


def load_indicator(lay: Layout, pids, name: str) -> list[IndicatorValue]:
    index = read_json(lay.indicators / "index.json", "indicator index", "indicators")
    out = []
    for pid in pids:
        if pid not in index:
            raise MissingPrerequisite(f"indicators of {pid}", "indicators")
        path = lay.indicators / name / f"{pid}.jsonl"
        if index[pid].get(name):
            out.extend(read_values(path))
    return out


def _filter(req: AggregationRequest, participants, calendar: SchoolCalendar):
    flt = ALL
    attrs = {p.id: {"age_band": p.age_band, "gender": p.gender} for p in participants}
    for key in ("age_band", "gender"):
        if key in req.filters:
            flt = flt & by_attribute(attrs, key, req.filters[key])
    if "day_type" in req.filters:
        day_types = {d.replace("-", ""): "school" for d in calendar.school_days}
        flt = flt & by_day_type(defaultdict(lambda: "non_school", day_types), req.filters["day_type"])
    return flt


def run_aggregation(cfg: RunConfig, req: AggregationRequest, catalog: IndicatorCatalog | None = None) -> dict:
    lay = Layout(cfg.output_dir)
    catalog = catalog or IndicatorCatalog.default(cfg.indicator_overrides)
    spec = catalog[req.indicator]  # unknown ids raise with the list of known ids
    participants = _participants(cfg, lay)
    homes = read_json(lay.homes, "home cells", "indicators")
    values = load_indicator(lay, [p.id for p in participants], req.indicator)
    tz = participants[0].timezone if participants else "UTC"
    tuples = build_tuples(values, catalog, req.mode, tz, homes)
    TupleStore(lay.tuples).write(tuples)
    kw = {}
    if req.function == "f3":
        if req.bins is not None:
            kw["bins"] = req.bins
        elif spec.categories:
            kw["categories"] = spec.categories
    if req.function == "f4":
        kw["threshold"] = req.threshold
        kw["strict"] = req.strict
    if req.weighting:
        kw["weighting"] = req.weighting
    kw["cfg"] = cfg.quality
    results = aggregate_cells(req.function, tuples, req.cell_length or cfg.geocell_length,
                              _filter(req, participants, _calendar(cfg, lay)), cfg.k_min, cfg.min_len, **kw)
    doc = {"request": req.to_dict(), "seed": cfg.seed, "k_min": cfg.k_min, "min_len": cfg.min_len,
           "units": spec.units, "results": [r.to_dict() for r in results]}
    out = lay.public / "aggregates" / f"{req.slug}.json"
    write_json(doc, out)
    summary = {"request": req.slug, "results": len(results),
               "suppressed": sum(1 for r in results if r.suppressed)}
    if req.choropleth:
        summary["choropleth"] = str(export_document(doc, lay.public / "choropleth" / f"{req.slug}.geojson"))
    return summary


def results_from_document(doc: dict) -> list[AggregateResult]:
    out = []
    for r in doc["results"]:
        out.append(AggregateResult(r["cell"], r["function"], r["indicator"], tuple(r.get("window", ())),
                                   r.get("value"), r.get("labels", []), r.get("n_participants", 0),
                                   r.get("n_tuples", 0), r.get("quality"), r["suppressed"],
                                   r.get("reason", "")))
    return out


def export_document(doc: dict, path: Path) -> Path:
    req = doc.get("request", {})
    title = "_".join(str(req.get(k, "")) for k in ("indicator", "mode", "function"))
    geo = export_choropleth(results_from_document(doc), title)
    validate_geojson(geo)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_geojson(geo, path)
    return path


def cmd_aggregate(cfg: RunConfig, requests=None) -> list[dict]:
    requests = list(requests if requests is not None else cfg.aggregations)
    catalog = IndicatorCatalog.default(cfg.indicator_overrides)
    return [run_aggregation(cfg, req, catalog) for req in requests]


def cmd_export(cfg: RunConfig, aggregate_path: Path, out_path: Path | None = None) -> Path:
    lay = Layout(cfg.output_dir)
    doc = read_json(Path(aggregate_path), f"aggregate {aggregate_path}", "aggregate")
    out_path = out_path or lay.public / "choropleth" / (Path(aggregate_path).stem + ".geojson")
    return export_document(doc, Path(out_path))


def _region_rows(cfg: RunConfig, lay: Layout) -> list[dict]:
    """Users and recorded hours per region, taken from the minute-level
    resources tuples and coarsened through the privacy gate; regions
    that stay below ``k_min`` participants are left out."""
    participants = _participants(cfg, lay)
    values = load_indicator(lay, [p.id for p in participants], "activity_counts")
    tz = participants[0].timezone if participants else "UTC"
    tuples = build_tuples(values, IndicatorCatalog.default(cfg.indicator_overrides), "resources", tz)
    index = CellIndex(tuples)
    regions = {}
    for cell in sorted({g[:cfg.geocell_length] for g in index.keys}):
        for length in range(len(cell), cfg.min_len - 1, -1):
            sub = index.under(cell[:length])
            users = {tp.u for tp in sub}
            if len(users) >= cfg.k_min:
                regions[cell[:length]] = {"key": cell[:length], "users": len(users),
                                          "hours": round(sum(tp.span_ms for tp in sub) / 3_600_000, 6)}
                break
    return [regions[k] for k in sorted(regions)]


def _write_report(report: dict, rows: list, stem: Path) -> None:
    stem.parent.mkdir(parents=True, exist_ok=True)
    stem.with_suffix(".csv").write_text(report_to_csv(rows), encoding="utf-8")
    stem.with_suffix(".json").write_text(report_to_json(report), encoding="utf-8")


def cmd_quality(cfg: RunConfig) -> dict:
    lay = Layout(cfg.output_dir)
    manifest = _require_manifest(lay)
    days = [{"key": pid, "day": d, "accel_hours": v["accel_hours"], "gps_hours": v["gps_hours"],
             "source": m["device_class"]}
            for pid, m in sorted(manifest.items()) for d, v in sorted(m["days"].items())]
    part = quality_report({"days": days, "regions": []}, cfg.quality)
    _write_report(part, part["rows"], lay.internal / "quality" / "participant_days")
    regional = quality_report({"days": [], "regions": _region_rows(cfg, lay)}, cfg.quality)
    _write_report(regional, regional["regions"], lay.public / "quality" / "regions")
    return {"participant_days": len(days), "regions": len(regional["regions"])}


def write_run_record(cfg: RunConfig) -> Path:
    path = Layout(cfg.output_dir).public / "run.json"
    write_json({"version": __version__, "seed": cfg.seed, "config": cfg.to_dict()}, path)
    return path


def cmd_run(cfg: RunConfig) -> dict:
    """Every stage in order; synthetic data is generated unless streams are
    given. Each stream is read once and shared by ingest and indicators;
    the outputs equal those of the separate commands."""
    lay = Layout(cfg.output_dir)
    out = {}
    if cfg.input_path("streams_dir") is None:
        out["generate"] = cmd_generate(cfg)
    manifest = {}
    writer = None
    for p in _participants(cfg, lay):
        res = _load(cfg, lay, p)
        manifest[p.id] = _ingest_record(p, res)
        writer = writer or _IndicatorWriter(cfg, lay)
        writer.add(p, res.stream)
    write_json(manifest, lay.manifest)
    out["ingest"] = _ingest_summary(manifest)
    out["indicators"] = (writer or _IndicatorWriter(cfg, lay)).finish()
    out["profile"] = cmd_profile(cfg)
    out["lec"] = cmd_lec(cfg)
    out["aggregate"] = cmd_aggregate(cfg)
    out["quality"] = cmd_quality(cfg)
    write_run_record(cfg)
    return out
