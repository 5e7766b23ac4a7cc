"""Per-cell and per-transition statistics over H3 cells."""

from __future__ import annotations

import hashlib
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

import h3.api.basic_int as h3
from h3 import H3BaseException
import numpy as np

from .geo import haversine
from .trip_segmenter import Trip

CellId = int


def assign_cell(lat: float, lon: float, r: int) -> CellId:
    """H3 cell containing ``(lat, lon)`` at resolution ``r``."""
    if not isinstance(r, (int, np.integer)) or not 0 <= r <= 15:
        raise ValueError(f"invalid H3 resolution {r!r}")
    return h3.latlng_to_cell(lat, lon, int(r))


def cell_resolution(cell: CellId) -> int:
    return h3.get_resolution(cell)


def cell_center(cell: CellId) -> tuple[float, float]:
    """``(lat, lon)`` of the cell centre."""
    return h3.cell_to_latlng(cell)


def cell_boundary(cell: CellId) -> list[tuple[float, float]]:
    """Boundary vertices as ``(lat, lon)``, counter-clockwise, not closed."""
    return list(h3.cell_to_boundary(cell))


def cell_to_str(cell: CellId) -> str:
    return h3.int_to_str(cell)


def str_to_cell(s: str) -> CellId:
    return h3.str_to_int(s)


def grid_distance(a: CellId, b: CellId) -> int:
    """Number of H3 steps between two cells of the same resolution."""
    ra, rb = h3.get_resolution(a), h3.get_resolution(b)
    if ra != rb:
        raise ValueError(f"cells at different resolutions ({ra} vs {rb})")
    if a == b:
        return 0
    try:
        return h3.grid_distance(a, b)
    except H3BaseException:
        return _approx_grid_distance(a, b, ra)


def _approx_grid_distance(a: CellId, b: CellId, r: int) -> int:
    # H3 cannot unfold the grid across some icosahedron faces; fall back to
    # a conservative estimate from the great-circle distance of the centres.
    lat1, lon1 = h3.cell_to_latlng(a)
    lat2, lon2 = h3.cell_to_latlng(b)
    spacing = math.sqrt(3) * h3.average_hexagon_edge_length(r, "m") * 1.25
    return max(1, int(haversine(lat1, lon1, lat2, lon2) // spacing))


def circular_median(angles) -> float | None:
    """Angle minimising the summed arc distance to ``angles`` (degrees).

    The minimiser is searched among the observations; ties resolve to the
    smallest angle. Runs in O(n log n).
    """
    a = np.sort(np.mod(np.asarray(angles, dtype=float), 360.0))
    n = a.size
    if n == 0:
        return None
    t = np.concatenate([a - 360.0, a, a + 360.0])
    csum = np.concatenate([[0.0], np.cumsum(t)])
    lo = np.searchsorted(t, a - 180.0, side="left")
    hi = lo + n
    mid = np.searchsorted(t, a, side="left")
    upper = csum[hi] - csum[mid] - (hi - mid) * a
    lower = (mid - lo) * a - (csum[mid] - csum[lo])
    cost = upper + lower
    best = np.flatnonzero(cost <= cost.min() + 1e-9 * max(1.0, n))
    return float(a[best[0]])


class HyperLogLog:
    """Small HyperLogLog sketch for approximate distinct counts."""

    def __init__(self, p: int = 12):
        self.p = p
        self.m = 1 << p
        self.registers = bytearray(self.m)

    def add(self, value: str) -> None:
        x = int.from_bytes(hashlib.blake2b(value.encode(), digest_size=8).digest(), "big")
        idx = x >> (64 - self.p)
        w = x & ((1 << (64 - self.p)) - 1)
        rank = (64 - self.p) - w.bit_length() + 1
        if rank > self.registers[idx]:
            self.registers[idx] = rank

    def merge(self, other: "HyperLogLog") -> None:
        self.registers = bytearray(max(a, b) for a, b in zip(self.registers, other.registers))

    def count(self) -> int:
        m = self.m
        alpha = 0.7213 / (1 + 1.079 / m)
        est = alpha * m * m / sum(2.0 ** -r for r in self.registers)
        zeros = self.registers.count(0)
        if est <= 2.5 * m and zeros:
            est = m * math.log(m / zeros)
        return max(1, int(round(est)))


@dataclass(frozen=True)
class CellStats:
    cell: CellId
    msg_count: int
    distinct_vessels: int
    median_lon: float
    median_lat: float
    median_sog: float | None = None
    median_cog: float | None = None


@dataclass(frozen=True)
class TransitionStats:
    src: CellId  # preceding cell
    dst: CellId
    trip_count: int
    grid_dist: int


@dataclass
class _CellBuffer:
    lons: list[float] = field(default_factory=list)
    lats: list[float] = field(default_factory=list)
    sogs: list[float] = field(default_factory=list)
    cogs: list[float] = field(default_factory=list)
    vessels: set[str] = field(default_factory=set)
    sketch: HyperLogLog | None = None


def trip_cells(trip: Trip, r: int) -> list[CellId]:
    return [assign_cell(p.lat, p.lon, r) for p in trip.points]


def aggregate_cells(trips: Iterable[Trip], r: int, approx_distinct: bool = False) -> dict[CellId, CellStats]:
    """Per-cell message count, distinct vessels and median position/kinematics."""
    buffers: dict[CellId, _CellBuffer] = defaultdict(_CellBuffer)
    for trip in trips:
        for p, cell in zip(trip.points, trip_cells(trip, r)):
            b = buffers[cell]
            b.lons.append(p.lon)
            b.lats.append(p.lat)
            if p.sog is not None:
                b.sogs.append(p.sog)
            if p.cog is not None:
                b.cogs.append(p.cog)
            if approx_distinct:
                if b.sketch is None:
                    b.sketch = HyperLogLog()
                b.sketch.add(p.vessel_id)
            else:
                b.vessels.add(p.vessel_id)
    out = {}
    for cell in sorted(buffers):
        b = buffers[cell]
        distinct = b.sketch.count() if approx_distinct else len(b.vessels)
        out[cell] = CellStats(
            cell=cell,
            msg_count=len(b.lons),
            distinct_vessels=min(distinct, len(b.lons)),
            median_lon=float(np.median(b.lons)),
            median_lat=float(np.median(b.lats)),
            median_sog=float(np.median(b.sogs)) if b.sogs else None,
            median_cog=circular_median(b.cogs) if b.cogs else None,
        )
    return out


def aggregate_transitions(trips: Iterable[Trip], r: int) -> dict[tuple[CellId, CellId], TransitionStats]:
    """Directed cell changes along each trip, counted once per trip."""
    pair_trips: dict[tuple[CellId, CellId], set[str]] = defaultdict(set)
    for trip in trips:
        cells = trip_cells(trip, r)
        for prev, cur in zip(cells, cells[1:]):
            if prev != cur:
                pair_trips[(prev, cur)].add(trip.trip_id)
    return {
        pair: TransitionStats(pair[0], pair[1], len(pair_trips[pair]), grid_distance(*pair))
        for pair in sorted(pair_trips)
    }
