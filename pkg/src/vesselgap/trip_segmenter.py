"""Per-vessel noise cleaning and segmentation of record streams into trips."""

from __future__ import annotations

import csv
import hashlib
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import h3.api.basic_int as h3

from .ais_model import AisRecord, RejectReason, Schema, format_timestamp, parse_record
from .geo import speed_knots


@dataclass(frozen=True)
class SegmenterConfig:
    stop_speed_knots: float = 0.5
    min_stop_duration: float = 900.0  # seconds
    gap_threshold: float = 1800.0  # seconds
    max_plausible_speed: float = 50.0  # knots
    min_trip_points: int = 3

    def __post_init__(self):
        for name in ("stop_speed_knots", "min_stop_duration", "gap_threshold", "max_plausible_speed"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)!r}")


@dataclass
class Trip:
    trip_id: str
    vessel_id: str
    points: list[AisRecord] = field(default_factory=list)

    @property
    def start_ts(self) -> int:
        return self.points[0].ts

    @property
    def end_ts(self) -> int:
        return self.points[-1].ts

    @property
    def duration_s(self) -> float:
        return (self.end_ts - self.start_ts) / 1000.0


def make_trip_id(vessel_id: str, first_ts: int) -> str:
    digest = hashlib.blake2b(f"{vessel_id}|{first_ts}".encode(), digest_size=8).hexdigest()
    return f"{vessel_id}-{digest}"


def clean_stream(
    records: Sequence[AisRecord], cfg: SegmenterConfig = SegmenterConfig()
) -> tuple[list[AisRecord], list[tuple[AisRecord, RejectReason]]]:
    """Drop duplicates, out-of-order and kinematically impossible records.

    Records are examined in arrival order; each is compared with the last
    record accepted so far.
    """
    accepted: list[AisRecord] = []
    rejected: list[tuple[AisRecord, RejectReason]] = []
    seen_ts: set[int] = set()
    for rec in records:
        if rec.ts in seen_ts:
            rejected.append((rec, RejectReason.DUPLICATE_RECORD))
            continue
        if accepted:
            last = accepted[-1]
            if rec.ts <= last.ts:
                rejected.append((rec, RejectReason.OUT_OF_ORDER))
                continue
            v = speed_knots(last.lat, last.lon, rec.lat, rec.lon, (rec.ts - last.ts) / 1000.0)
            if v > cfg.max_plausible_speed:
                rejected.append((rec, RejectReason.KINEMATIC_OUTLIER))
                continue
        accepted.append(rec)
        seen_ts.add(rec.ts)
    return accepted, rejected


def _speeds(records: Sequence[AisRecord]) -> list[float]:
    """Reported sog where available, otherwise speed derived from neighbours."""
    n = len(records)
    out = []
    for i, rec in enumerate(records):
        if rec.sog is not None:
            out.append(rec.sog)
            continue
        j, k = (i - 1, i) if i > 0 else (0, 1)
        if k >= n:
            out.append(float("inf"))
            continue
        a, b = records[j], records[k]
        out.append(speed_knots(a.lat, a.lon, b.lat, b.lon, (b.ts - a.ts) / 1000.0))
    return out


def detect_stops(records: Sequence[AisRecord], cfg: SegmenterConfig = SegmenterConfig()) -> list[tuple[int, int]]:
    """Maximal slow runs ``[start, end]`` (inclusive) lasting at least ``min_stop_duration``."""
    speeds = _speeds(records)
    stops = []
    i, n = 0, len(records)
    while i < n:
        if speeds[i] >= cfg.stop_speed_knots:
            i += 1
            continue
        j = i
        while j + 1 < n and speeds[j + 1] < cfg.stop_speed_knots:
            j += 1
        if (records[j].ts - records[i].ts) / 1000.0 >= cfg.min_stop_duration:
            stops.append((i, j))
        i = j + 1
    return stops


def segment_indices(records: Sequence[AisRecord], cfg: SegmenterConfig = SegmenterConfig()) -> list[list[int]]:
    """Index lists of each trip before the minimum-length filter."""
    stops = detect_stops(records, cfg)
    stop_start = {s for s, _ in stops}
    interior = set()
    for s, e in stops:
        interior.update(range(s + 1, e))
    gap_ms = cfg.gap_threshold * 1000.0
    pieces: list[list[int]] = []
    current: list[int] = []
    for i, rec in enumerate(records):
        if i in interior:
            if current:
                pieces.append(current)
                current = []
            continue
        if current and rec.ts - records[current[-1]].ts >= gap_ms:
            pieces.append(current)
            current = []
        current.append(i)
        if i in stop_start:
            pieces.append(current)
            current = []
    if current:
        pieces.append(current)
    return pieces


def segment_trips(records: Sequence[AisRecord], cfg: SegmenterConfig = SegmenterConfig()) -> list[Trip]:
    """Split one vessel's cleaned stream at stops and communication gaps."""
    trips = []
    for idx in segment_indices(records, cfg):
        if len(idx) < cfg.min_trip_points:
            continue
        pts = [records[i] for i in idx]
        trips.append(Trip(make_trip_id(pts[0].vessel_id, pts[0].ts), pts[0].vessel_id, pts))
    return trips


def filter_micro_trips(trips: Iterable[Trip], r: int) -> list[Trip]:
    """Remove trips confined to one cell or two adjacent cells at resolution ``r``."""
    if not 0 <= r <= 15:
        raise ValueError(f"invalid H3 resolution {r}")
    kept = []
    for trip in trips:
        cells = {h3.latlng_to_cell(p.lat, p.lon, r) for p in trip.points}
        if len(cells) == 1:
            continue
        if len(cells) == 2:
            a, b = cells
            if h3.are_neighbor_cells(a, b):
                continue
        kept.append(trip)
    return kept


@dataclass
class IngestResult:
    trips: list[Trip]
    rejected: dict[RejectReason, int]
    n_input: int
    n_micro_trips: int = 0


def group_by_vessel(records: Iterable[AisRecord]) -> dict[str, list[AisRecord]]:
    groups: dict[str, list[AisRecord]] = defaultdict(list)
    for rec in records:
        groups[rec.vessel_id].append(rec)
    return groups


def process_vessel(records: Sequence[AisRecord], cfg: SegmenterConfig) -> tuple[list[Trip], list[RejectReason]]:
    accepted, rejected = clean_stream(records, cfg)
    return segment_trips(accepted, cfg), [reason for _, reason in rejected]


def segment_corpus(
    records: Iterable[AisRecord],
    cfg: SegmenterConfig = SegmenterConfig(),
    resolution: int | None = None,
    workers: int = 1,
) -> IngestResult:
    """Clean and segment every vessel; optionally drop micro-trips at ``resolution``.

    Vessels are processed independently (in a process pool when
    ``workers > 1``) and merged in vessel-id order.
    """
    groups = group_by_vessel(records)
    n_input = sum(len(v) for v in groups.values())
    vessel_ids = sorted(groups)
    if workers > 1 and len(vessel_ids) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(process_vessel, [groups[v] for v in vessel_ids], [cfg] * len(vessel_ids)))
    else:
        results = [process_vessel(groups[v], cfg) for v in vessel_ids]
    trips: list[Trip] = []
    rejected: dict[RejectReason, int] = {}
    for vessel_trips, reasons in results:
        trips.extend(vessel_trips)
        for reason in reasons:
            rejected[reason] = rejected.get(reason, 0) + 1
    n_micro = 0
    if resolution is not None:
        kept = filter_micro_trips(trips, resolution)
        n_micro = len(trips) - len(kept)
        trips = kept
    return IngestResult(trips, rejected, n_input, n_micro)


TRIP_HEADER = ["trip_id", "vessel_id", "ts", "lon", "lat", "sog", "cog"]


def write_trips(trips: Iterable[Trip], path: str | Path, delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(TRIP_HEADER)
        for trip in trips:
            for p in trip.points:
                w.writerow([
                    trip.trip_id,
                    p.vessel_id,
                    format_timestamp(p.ts),
                    repr(p.lon),
                    repr(p.lat),
                    "" if p.sog is None else repr(p.sog),
                    "" if p.cog is None else repr(p.cog),
                ])


def read_trips(path: str | Path, delimiter: str = ",") -> list[Trip]:
    """Load a file written by :func:`write_trips`; trip order is preserved."""
    schema = Schema(vessel_id=1, ts=2, lon=3, lat=4, sog=5, cog=6, delimiter=delimiter)
    trips: dict[str, Trip] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(fh, delimiter=delimiter)
        header = next(rows, None)
        if header is None:
            return []
        if [h.strip() for h in header] != TRIP_HEADER:
            raise ValueError(f"{path}: not a trips file (header {header!r})")
        for cells in rows:
            if not cells:
                continue
            rec = parse_record(cells, schema)
            trip = trips.get(cells[0])
            if trip is None:
                trip = trips[cells[0]] = Trip(cells[0], rec.vessel_id, [])
            trip.points.append(rec)
    return list(trips.values())
