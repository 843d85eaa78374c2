"""Run configuration: one JSON document drives every pipeline command."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .aggregate.functions import DEFAULT_K_MIN, DEFAULT_MIN_LEN, FUNCTIONS
from .aggregate.tuples import MODES
from .mobility.stops import StopParams
from .mobility.timeline import SegmentationParams
from .mobility.transport import TransportParams
from .quality import QualityConfig
from .timeutil import MS_PER_MIN

CONFIG_ENV = "GEOBEHAVE_CONFIG"
DEFAULT_SEED = 20190909

INPUT_KEYS = ("generator_spec", "streams_dir", "participants", "calendar", "poi_snapshot", "stat_table",
              "region_map", "taxonomy")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AggregationRequest:
    indicator: str
    function: str = "f1"
    mode: str = "resources"
    cell_length: int | None = None
    threshold: float | None = None
    bins: tuple | None = None
    strict: bool = False
    weighting: str | None = None
    filters: dict = field(default_factory=dict)
    choropleth: bool = False

    def __post_init__(self):
        if self.function not in FUNCTIONS:
            raise ConfigError(f"unknown function {self.function!r}; choose from {FUNCTIONS}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.function == "f4" and self.threshold is None:
            raise ConfigError("f4 requests need a threshold")
        if self.cell_length is not None and not 1 <= self.cell_length <= 12:
            raise ConfigError("cell_length must be within 1..12")
        unknown = set(self.filters) - {"age_band", "gender", "day_type"}
        if unknown:
            raise ConfigError(f"unknown filter keys {sorted(unknown)}")

    @property
    def slug(self) -> str:
        parts = [self.indicator, self.mode, self.function]
        if self.cell_length:
            parts.append(f"L{self.cell_length}")
        if self.threshold is not None:
            parts.append(f"t{self.threshold:g}")
        for k in sorted(self.filters):
            parts.append(f"{k}-{'+'.join(sorted(self.filters[k]))}")
        return "_".join(parts)

    def to_dict(self) -> dict:
        d = {"indicator": self.indicator, "function": self.function, "mode": self.mode}
        for k in ("cell_length", "threshold", "weighting"):
            if getattr(self, k) is not None:
                d[k] = getattr(self, k)
        if self.bins is not None:
            d["bins"] = list(self.bins)
        if self.strict:
            d["strict"] = True
        if self.filters:
            d["filters"] = {k: sorted(v) for k, v in sorted(self.filters.items())}
        if self.choropleth:
            d["choropleth"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AggregationRequest":
        filters = {k: tuple(v) if isinstance(v, (list, tuple)) else (v,) for k, v in d.get("filters", {}).items()}
        bins = tuple(float(b) for b in d["bins"]) if d.get("bins") is not None else None
        return cls(d["indicator"], d.get("function", "f1"), d.get("mode", "resources"), d.get("cell_length"),
                   d.get("threshold"), bins, bool(d.get("strict", False)), d.get("weighting"), filters,
                   bool(d.get("choropleth", False)))


DEFAULT_AGGREGATIONS = (
    {"indicator": "activity_counts", "function": "f2", "mode": "resources", "cell_length": 7, "choropleth": True},
    {"indicator": "daily_steps", "function": "f4", "mode": "habits", "threshold": 5000},
    {"indicator": "transport_mode", "function": "f3", "mode": "habits"},
    {"indicator": "active_commute_minutes", "function": "f1", "mode": "habits"},
    {"indicator": "fast_food_per_week", "function": "f1", "mode": "habits"},
    {"indicator": "avg_sleep_hours", "function": "f1", "mode": "habits"},
)


@dataclass
class RunConfig:
    output_dir: Path
    seed: int = DEFAULT_SEED
    inputs: dict = field(default_factory=dict)
    geocell_length: int = 6
    k_min: int = DEFAULT_K_MIN
    min_len: int = DEFAULT_MIN_LEN
    stops: StopParams = field(default_factory=StopParams)
    transport: TransportParams = field(default_factory=TransportParams)
    match_radius_m: float = 75.0
    quality: QualityConfig = field(default_factory=QualityConfig)
    indicator_overrides: dict = field(default_factory=dict)
    aggregations: list = field(default_factory=list)
    raw: dict = field(default_factory=dict)

    @property
    def segmentation(self) -> SegmentationParams:
        return SegmentationParams(self.stops, self.transport, self.match_radius_m)

    def input_path(self, key: str) -> Path | None:
        v = self.inputs.get(key)
        return Path(v) if v else None

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "RunConfig":
        base = Path(base_dir) if base_dir is not None else Path.cwd()
        unknown = set(d) - {"output_dir", "seed", "inputs", "geocell_length", "k_min", "min_len", "stops",
                            "transport", "match_radius_m", "quality", "indicator_overrides", "aggregations"}
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "output_dir" not in d:
            raise ConfigError("output_dir is required")
        inputs = {}
        for k, v in (d.get("inputs") or {}).items():
            if k not in INPUT_KEYS:
                raise ConfigError(f"unknown input {k!r}; known: {', '.join(INPUT_KEYS)}")
            if v:
                p = Path(v)
                inputs[k] = str(p if p.is_absolute() else base / p)
        st = d.get("stops", {})
        tr = d.get("transport", {})
        try:
            stops = StopParams(float(st.get("eps_m", 75.0)),
                               int(round(float(st.get("min_duration_min", 10)) * MS_PER_MIN)),
                               int(st.get("min_pts", 3)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        transport = TransportParams(float(tr.get("walking_max_kmh", 7.0)), float(tr.get("cycling_max_kmh", 16.0)))
        if not 0 < transport.walking_max_kmh < transport.cycling_max_kmh:
            raise ConfigError("transport cut-points must satisfy 0 < walking < cycling")
        out = Path(d["output_dir"])
        cfg = cls(
            output_dir=out if out.is_absolute() else base / out,
            seed=int(d.get("seed", DEFAULT_SEED)),
            inputs=inputs,
            geocell_length=int(d.get("geocell_length", 6)),
            k_min=int(d.get("k_min", DEFAULT_K_MIN)),
            min_len=int(d.get("min_len", DEFAULT_MIN_LEN)),
            stops=stops,
            transport=transport,
            match_radius_m=float(d.get("match_radius_m", 75.0)),
            quality=QualityConfig.from_dict(d.get("quality")),
            indicator_overrides=dict(d.get("indicator_overrides", {})),
            aggregations=[AggregationRequest.from_dict(a)
                          for a in d.get("aggregations", DEFAULT_AGGREGATIONS)],
            raw=dict(d),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not 1 <= self.geocell_length <= 12:
            raise ConfigError("geocell_length must be within 1..12")
        if self.k_min < 2:
            raise ConfigError("k_min must be at least 2")
        if not 1 <= self.min_len <= self.geocell_length:
            raise ConfigError("min_len must be within 1..geocell_length")
        if self.match_radius_m <= 0:
            raise ConfigError("match_radius_m must be positive")
        for k, v in self.inputs.items():
            if not Path(v).exists():
                raise ConfigError(f"input {k} does not exist: {v}")

    def to_dict(self) -> dict:
        """Resolved configuration as recorded in run outputs (paths relative
        to the output directory's parent where possible)."""
        return {
            "seed": self.seed,
            "inputs": {k: Path(v).name for k, v in sorted(self.inputs.items())},
            "geocell_length": self.geocell_length,
            "k_min": self.k_min,
            "min_len": self.min_len,
            "stops": {"eps_m": self.stops.eps_m, "min_duration_min": self.stops.min_duration_ms / MS_PER_MIN,
                      "min_pts": self.stops.min_pts},
            "transport": {"walking_max_kmh": self.transport.walking_max_kmh,
                          "cycling_max_kmh": self.transport.cycling_max_kmh},
            "match_radius_m": self.match_radius_m,
            "quality": {"norm": self.quality.norm, "conorm": self.quality.conorm},
            "indicator_overrides": self.indicator_overrides,
            "aggregations": [a.to_dict() for a in self.aggregations],
        }


def load_config(path: str | os.PathLike | None = None, overrides: dict | None = None) -> RunConfig:
    """Config from ``path``, else from the file named by $GEOBEHAVE_CONFIG.

    ``overrides`` replace top-level keys (command-line flags).
    """
    path = path or os.environ.get(CONFIG_ENV)
    if path is None:
        raise ConfigError(f"no config given; pass --config or set {CONFIG_ENV}")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        d = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    for k, v in (overrides or {}).items():
        if v is not None:
            d[k] = v
    return RunConfig.from_dict(d, p.parent)
