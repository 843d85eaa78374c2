"""Command-line interface.

Exit codes: 0 success, 1 validation error, 2 missing prerequisite (the
message names the command to run first).
"""
from __future__ import annotations

import json
import logging
import sys
from functools import wraps
from pathlib import Path

import click

from . import pipeline
from .aggregate.functions import AggregationError
from .config import AggregationRequest, ConfigError, load_config
from .indicators.catalog import CatalogError
from .ingest.generate import GeneratorSpecError
from .ingest.records import RecordError, StreamError
from .quality import QualityError

EXIT_VALIDATION = 1
EXIT_PREREQUISITE = 2

VALIDATION_ERRORS = (ConfigError, CatalogError, AggregationError, GeneratorSpecError, RecordError, StreamError,
                     QualityError, ValueError)


def _echo(obj) -> None:
    click.echo(json.dumps(obj, sort_keys=True, indent=1))


def stage(fn):
    """Load the config, run the stage and map failures to exit codes."""

    @click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                  help="Run config JSON (default: $GEOBEHAVE_CONFIG).")
    @click.option("--seed", type=int, default=None, help="Override the configured seed.")
    @click.option("--output-dir", type=click.Path(file_okay=False), default=None,
                  help="Override the configured output directory.")
    @click.option("--geocell-length", type=int, default=None, help="Override the default region length.")
    @click.option("--k-min", type=int, default=None, help="Override the minimum participants per region.")
    @click.option("--min-len", type=int, default=None, help="Override the shortest region the gate may use.")
    @click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
    @wraps(fn)
    def wrapper(config_path, seed, output_dir, geocell_length, k_min, min_len, verbose, **kw):
        logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
        try:
            overrides = {"seed": seed, "output_dir": str(Path(output_dir).resolve()) if output_dir else None,
                         "geocell_length": geocell_length, "k_min": k_min, "min_len": min_len}
            cfg = load_config(config_path, overrides)
            result = fn(cfg, **kw)
        except pipeline.MissingPrerequisite as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_PREREQUISITE)
        except VALIDATION_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        if result is not None:
            _echo(result)

    return wrapper


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Behavioural indicators, environment conditions and privacy-gated
    regional aggregates from wearable and phone sensor streams."""


@main.command()
@stage
def generate(cfg):
    """Generate the synthetic cohort, POI snapshot and statistics table."""
    return pipeline.cmd_generate(cfg)


@main.command()
@stage
def ingest(cfg):
    """Validate the sensor streams and record per-day availability."""
    return pipeline.cmd_ingest(cfg)


@main.command()
@stage
def indicators(cfg):
    """Extract base and derived indicators (and segment timelines)."""
    return pipeline.cmd_indicators(cfg)


@main.command()
@stage
def profile(cfg):
    """Build behavior profiles and their DOT graphs from the timelines."""
    return pipeline.cmd_profile(cfg)


@main.command()
@stage
def lec(cfg):
    """Compute local extrinsic conditions per geocell."""
    return pipeline.cmd_lec(cfg)


@main.command()
@click.option("--indicator", default=None, help="Indicator id (default: the configured aggregations).")
@click.option("--function", "function", type=click.Choice(["f1", "f2", "f3", "f4"]), default="f1")
@click.option("--mode", type=click.Choice(["habits", "resources"]), default="resources")
@click.option("--cell-length", type=click.IntRange(1, 12), default=None)
@click.option("--threshold", type=float, default=None, help="Threshold for f4.")
@click.option("--strict", is_flag=True, help="f4 counts values strictly below the threshold.")
@click.option("--bins", default=None, help="Comma-separated bin edges for f3.")
@click.option("--weighting", type=click.Choice(["weighted", "gated"]), default=None)
@click.option("--filter", "filters", multiple=True, help="key=value[,value...] on age_band, gender, day_type.")
@click.option("--choropleth", is_flag=True, help="Also export the result as GeoJSON.")
@stage
def aggregate(cfg, indicator, function, mode, cell_length, threshold, strict, bins, weighting, filters,
              choropleth):
    """Aggregate an indicator per region through the privacy gate."""
    if indicator is None:
        return pipeline.cmd_aggregate(cfg)
    flt = {}
    for f in filters:
        key, sep, vals = f.partition("=")
        if not sep or not vals:
            raise ConfigError(f"filter {f!r} is not key=value")
        flt[key.strip()] = tuple(v.strip() for v in vals.split(","))
    edges = None
    if bins:
        try:
            edges = tuple(float(b) for b in bins.split(","))
        except ValueError:
            raise ConfigError(f"bins {bins!r} are not numbers") from None
    req = AggregationRequest(indicator, function, mode, cell_length, threshold, edges, strict, weighting, flt,
                             choropleth)
    return pipeline.cmd_aggregate(cfg, [req])


@main.command("export-choropleth")
@click.argument("aggregate_file", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="GeoJSON path inside the output dir.")
@stage
def export_choropleth(cfg, aggregate_file, out):
    """Export a stored aggregate result as a GeoJSON choropleth."""
    root = cfg.output_dir.resolve()
    target = Path(out).resolve() if out else None
    if target is not None and root not in target.parents:
        raise ConfigError(f"--out must lie inside the output directory {root}")
    return {"choropleth": str(pipeline.cmd_export(cfg, Path(aggregate_file), target))}


@main.command()
@stage
def quality(cfg):
    """Write the participant-day and regional quality reports."""
    return pipeline.cmd_quality(cfg)


@main.command()
@stage
def run(cfg):
    """Run every stage in order."""
    return pipeline.cmd_run(cfg)


if __name__ == "__main__":  # pragma: no cover
    main()
