"""Reading and writing sensor streams.

Record formats
--------------
JSONL, one object per line, every object carrying ``pid``, ``t`` (UTC epoch
milliseconds) and ``kind``:

* ``{"kind": "accel", "x": .., "y": .., "z": .., "rate_hz": ..}`` one sample
  (``rate_hz`` optional, estimated from spacing when absent);
* ``{"kind": "accel", "rate_hz": 10, "x": [..], "y": [..], "z": [..]}`` an
  evenly spaced block starting at ``t``;
* ``{"kind": "gps", "lat": .., "lon": .., "accuracy_m": ..}``;
* ``{"kind": "report", "report_kind": "meal" | "food_ad", "meal_type": ..,
  "food_category": .., "photo_ref": ..}``.

CSV: accelerometer files have header ``pid,t,x,y,z[,rate_hz]``, GPS files
``pid,t,lat,lon[,accuracy_m]``.

Bulk accelerometer data may also live in an ``.npz`` sidecar (see
:func:`write_accel_npz`), stored as int16 milli-g.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
import zipfile
from pathlib import Path

import numpy as np

from .records import (
    GAP_THRESHOLD_MS,
    MAX_ACCEL_G,
    AccelSegment,
    GpsSample,
    RecordError,
    SelfReportEvent,
    SensorStream,
    StreamError,
    validate_accel_arrays,
)

log = logging.getLogger(__name__)

MAX_REJECT_FRACTION = 0.5


@dataclass
class Reject:
    line: int
    reason: str


@dataclass
class ParseResult:
    stream: SensorStream
    n_records: int
    rejects: list[Reject] = field(default_factory=list)

    @property
    def n_rejected(self) -> int:
        return len(self.rejects)


class _Collector:
    def __init__(self):
        self.pid = None
        self.accel_rows: list[tuple[int, float, float, float, float | None]] = []
        self.accel_blocks: list[AccelSegment] = []
        self.gps: list[GpsSample] = []
        self.reports: list[SelfReportEvent] = []
        self.last_t = {"accel": None, "gps": None, "report": None}
        self.rejects: list[Reject] = []
        self.n = 0

    def check_pid(self, pid) -> None:
        if not isinstance(pid, str) or not pid:
            raise RecordError("missing pid")
        if self.pid is None:
            self.pid = pid
        elif pid != self.pid:
            raise RecordError(f"pid {pid!r} differs from stream pid {self.pid!r}")

    def check_order(self, kind: str, t_first: int, t_last: int) -> None:
        prev = self.last_t[kind]
        if prev is not None and t_first <= prev:
            raise RecordError(f"non-monotone timestamp {t_first} after {prev}")
        self.last_t[kind] = t_last

    def add(self, lineno: int, rec: dict) -> None:
        self.n += 1
        try:
            self._add(rec)
        except (RecordError, KeyError, TypeError, ValueError) as exc:
            reason = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
            self.rejects.append(Reject(lineno, reason))

    def _add(self, rec: dict) -> None:
        if not isinstance(rec, dict):
            raise RecordError("record is not an object")
        t = _as_ms(rec["t"])
        kind = rec["kind"]
        if kind == "accel":
            if isinstance(rec.get("x"), list):
                seg = _block_from_record(rec, t)
                self.check_pid(rec.get("pid"))
                self.check_order("accel", seg.start, seg.end)
                self.accel_blocks.append(seg)
            else:
                x, y, z = (_finite(rec[k], k) for k in ("x", "y", "z"))
                if x * x + y * y + z * z >= MAX_ACCEL_G**2:
                    raise RecordError(f"acceleration magnitude >= {MAX_ACCEL_G} g")
                rate = rec.get("rate_hz")
                if rate is not None:
                    rate = _finite(rate, "rate_hz")
                    if rate <= 0:
                        raise RecordError("rate_hz must be positive")
                self.check_pid(rec.get("pid"))
                self.check_order("accel", t, t)
                self.accel_rows.append((t, x, y, z, rate))
        elif kind == "gps":
            g = GpsSample(t, _finite(rec["lat"], "lat"), _finite(rec["lon"], "lon"),
                          _finite(rec.get("accuracy_m", 10.0), "accuracy_m"))
            self.check_pid(rec.get("pid"))
            self.check_order("gps", t, t)
            self.gps.append(g)
        elif kind == "report":
            r = SelfReportEvent(
                t,
                rec.get("report_kind", "meal"),
                rec.get("meal_type"),
                rec.get("food_category"),
                rec.get("photo_ref"),
            )
            self.check_pid(rec.get("pid"))
            self.check_order("report", t, t)
            self.reports.append(r)
        else:
            raise RecordError(f"unknown kind {kind!r}")

    def build(self, timezone: str) -> ParseResult:
        if self.n and len(self.rejects) / self.n > MAX_REJECT_FRACTION:
            raise StreamError(
                f"{len(self.rejects)} of {self.n} records rejected; first: "
                + "; ".join(f"line {r.line}: {r.reason}" for r in self.rejects[:3])
            )
        segments = list(self.accel_blocks) + _segments_from_rows(self.accel_rows)
        segments.sort(key=lambda s: s.start)
        stream = SensorStream(self.pid or "", segments, self.gps, self.reports, timezone)
        for r in self.rejects:
            log.warning("rejected line %d: %s", r.line, r.reason)
        return ParseResult(stream, self.n, self.rejects)


def _as_ms(value) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RecordError(f"timestamp must be epoch milliseconds, got {value!r}")
    if not math.isfinite(value):
        raise RecordError("non-finite timestamp")
    return int(value)


def _finite(value, name: str) -> float:
    if isinstance(value, bool):
        raise RecordError(f"{name} must be a number")
    v = float(value)
    if not math.isfinite(v):
        raise RecordError(f"{name} is not finite")
    return v


def _block_from_record(rec: dict, t0: int) -> AccelSegment:
    rate = _finite(rec["rate_hz"], "rate_hz")
    if rate <= 0:
        raise RecordError("rate_hz must be positive")
    xyz = np.column_stack([np.asarray(rec[k], dtype=float) for k in ("x", "y", "z")])
    n = len(xyz)
    if n == 0:
        raise RecordError("empty accel block")
    t = t0 + np.round(np.arange(n) * 1000.0 / rate).astype(np.int64)
    validate_accel_arrays(t, xyz)
    return AccelSegment(t, xyz, rate)


def _segments_from_rows(rows) -> list[AccelSegment]:
    """Group single-sample rows into segments split at gaps and rate changes."""
    if not rows:
        return []
    t = np.array([r[0] for r in rows], dtype=np.int64)
    xyz = np.array([r[1:4] for r in rows], dtype=float)
    rates = [r[4] for r in rows]
    breaks = [0]
    for i in range(1, len(rows)):
        if t[i] - t[i - 1] > GAP_THRESHOLD_MS or rates[i] != rates[i - 1]:
            breaks.append(i)
    breaks.append(len(rows))
    out = []
    for a, b in zip(breaks, breaks[1:]):
        rate = rates[a]
        if rate is None:
            if b - a > 1:
                rate = 1000.0 / float(np.median(np.diff(t[a:b])))
            else:
                rate = 1.0
        out.append(AccelSegment(t[a:b], xyz[a:b], float(rate)))
    return out


def parse_stream(source, format: str | None = None, timezone: str = "UTC") -> ParseResult:
    """Parse one participant's record file into a validated stream.

    Bad rows are rejected individually and reported with their line number.
    More than half the rows rejected is a stream-level error.
    """
    path = Path(source)
    fmt = format or path.suffix.lstrip(".").lower()
    col = _Collector()
    if fmt == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    col.n += 1
                    col.rejects.append(Reject(lineno, f"malformed JSON: {exc.msg}"))
                    continue
                col.add(lineno, rec)
    elif fmt == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            fields = set(reader.fieldnames or [])
            if {"x", "y", "z"} <= fields:
                kind = "accel"
            elif {"lat", "lon"} <= fields:
                kind = "gps"
            else:
                raise StreamError(f"unrecognised CSV header {reader.fieldnames}")
            for lineno, row in enumerate(reader, 2):
                try:
                    rec = _csv_record(row, kind)
                except (ValueError, KeyError) as exc:
                    col.n += 1
                    col.rejects.append(Reject(lineno, f"malformed row: {exc}"))
                    continue
                col.add(lineno, rec)
    else:
        raise ValueError(f"unsupported format {fmt!r}")
    return col.build(timezone)


def _csv_record(row: dict, kind: str) -> dict:
    rec = {"pid": row["pid"], "t": int(row["t"]), "kind": kind}
    if kind == "accel":
        for k in ("x", "y", "z"):
            rec[k] = float(row[k])
        if row.get("rate_hz"):
            rec["rate_hz"] = float(row["rate_hz"])
    else:
        rec["lat"] = float(row["lat"])
        rec["lon"] = float(row["lon"])
        if row.get("accuracy_m"):
            rec["accuracy_m"] = float(row["accuracy_m"])
    return rec


def write_jsonl(stream: SensorStream, path, include_accel: bool = True) -> None:
    """Write a stream as JSONL; accel segments become block records."""
    rows = []
    if include_accel:
        for seg in stream.accel:
            rows.append((seg.start, 0, {
                "pid": stream.participant, "t": seg.start, "kind": "accel",
                "rate_hz": seg.rate_hz,
                "x": [round(float(v), 4) for v in seg.xyz[:, 0]],
                "y": [round(float(v), 4) for v in seg.xyz[:, 1]],
                "z": [round(float(v), 4) for v in seg.xyz[:, 2]],
            }))
    for g in stream.gps:
        rows.append((g.t, 1, {"pid": stream.participant, "t": g.t, "kind": "gps",
                              "lat": g.lat, "lon": g.lon, "accuracy_m": g.accuracy_m}))
    for r in stream.reports:
        rows.append((r.t, 2, {"pid": stream.participant, "kind": "report", **r.to_dict()}))
    rows.sort(key=lambda x: (x[0], x[1]))
    with open(path, "w", encoding="utf-8") as fh:
        for _, _, rec in rows:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def _save_npz(path, arrays: dict, level: int = 1) -> None:
    # np.savez stamps members with the wall clock; a fixed date keeps the bytes reproducible
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED, compresslevel=level) as zf:
        for name, arr in arrays.items():
            info = zipfile.ZipInfo(name + ".npy", date_time=_ZIP_EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
            zf.writestr(info, buf.getvalue(), compresslevel=level)


def _rle(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if not len(x):
        return x[:0], np.zeros(0, dtype=np.int64)
    starts = np.concatenate(([0], np.flatnonzero(np.diff(x)) + 1))
    return x[starts], np.diff(np.append(starts, len(x)))


def write_accel_npz(segments: list[AccelSegment], path) -> None:
    """Bulk accelerometer storage: int16 milli-g per axis stored as byte
    planes, timestamps as per-segment starts plus run-length coded steps."""
    if segments:
        t0 = np.array([s.start for s in segments], dtype=np.int64)
        lens = np.array([len(s) for s in segments], dtype=np.int64)
        rates = np.array([s.rate_hz for s in segments], dtype=np.float64)
        dt = np.concatenate([np.diff(s.t) for s in segments]).astype(np.int64)
        xyz = np.concatenate([s.xyz for s in segments])
    else:
        t0 = lens = np.zeros(0, dtype=np.int64)
        rates = np.zeros(0)
        dt = np.zeros(0, dtype=np.int64)
        xyz = np.zeros((0, 3))
    dt_values, dt_runs = _rle(dt)
    milli = np.clip(np.round(xyz * 1000.0), -32767, 32767).astype("<i2")
    # byte planes (all low bytes, then all high bytes) per axis deflate faster and smaller
    planes = np.ascontiguousarray(milli.T).view(np.uint8).reshape(3, -1, 2).transpose(0, 2, 1)
    _save_npz(path, {"t0": t0, "lens": lens, "rates": rates, "dt_values": dt_values, "dt_runs": dt_runs,
                     "xyz_planes": planes})


def read_accel_npz(path) -> list[AccelSegment]:
    with np.load(path) as z:
        t0, lens, rates = z["t0"], z["lens"], z["rates"]
        dt = np.repeat(z["dt_values"], z["dt_runs"])
        planes = z["xyz_planes"]
    n = planes.shape[2]
    xyz = np.empty((n, 3), dtype=np.float32)
    for k in range(3):
        axis = np.ascontiguousarray(planes[k].T).view("<i2").reshape(-1)
        np.multiply(axis, np.float32(0.001), out=xyz[:, k], casting="unsafe")
    out = []
    pos = 0
    dpos = 0
    for start, m, rate in zip(t0, lens, rates):
        m = int(m)
        t = np.empty(m, dtype=np.int64)
        t[0] = start
        t[1:] = start + np.cumsum(dt[dpos:dpos + m - 1], dtype=np.int64)
        out.append(AccelSegment(t, xyz[pos:pos + m], float(rate)))
        pos += m
        dpos += m - 1
    return out


def load_stream(jsonl_path, accel_npz=None, timezone: str = "UTC") -> ParseResult:
    """JSONL records plus an optional bulk accelerometer sidecar."""
    res = parse_stream(jsonl_path, "jsonl", timezone)
    if accel_npz is not None and Path(accel_npz).exists():
        segs = res.stream.accel + read_accel_npz(accel_npz)
        segs.sort(key=lambda s: s.start)
        s = res.stream
        res.stream = SensorStream(s.participant, segs, s.gps, s.reports, timezone)
    return res
