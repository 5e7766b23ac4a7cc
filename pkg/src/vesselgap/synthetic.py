"""Seeded synthetic AIS corpora along a sinusoidal shipping corridor.

Used for fixtures and for exercising the pipeline without real data. Each
vessel sails the corridor back and forth; consecutive voyages are separated
by a long silence so segmentation yields one trip per voyage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ais_model import AisRecord
from .geo import EARTH_RADIUS_M, METERS_PER_NM
from .trip_segmenter import SegmenterConfig, Trip, segment_corpus

T0_MS = 1_704_067_200_000  # 2024-01-01T00:00:00Z


@dataclass(frozen=True)
class Corridor:
    length_m: float = 36_000.0  # along the x axis
    amplitude_m: float = 1_500.0
    wavelength_m: float = 8_000.0
    lat0: float = 55.5
    lon0: float = 11.0
    heading_deg: float = 0.0  # rotation of the x axis, counter-clockwise from east

    def centreline(self, n: int = 4000) -> tuple[np.ndarray, np.ndarray]:
        """Dense ``(x, y)`` samples of the centreline in local meters."""
        x = np.linspace(0.0, self.length_m, n)
        y = self.amplitude_m * np.sin(2 * math.pi * x / self.wavelength_m)
        return x, y

    def to_lonlat(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        th = math.radians(self.heading_deg)
        e = x * math.cos(th) - y * math.sin(th)
        n = x * math.sin(th) + y * math.cos(th)
        lat = self.lat0 + np.degrees(n / EARTH_RADIUS_M)
        lon = self.lon0 + np.degrees(e / (EARTH_RADIUS_M * math.cos(math.radians(self.lat0))))
        return lon, lat


def corridor_records(
    n_trips: int = 200,
    corridor: Corridor = Corridor(),
    seed: int = 0,
    n_vessels: int = 20,
    speed_knots: tuple[float, float] = (4.5, 5.5),
    report_interval_s: float = 60.0,
    lane_sigma_m: float = 80.0,
    point_sigma_m: float = 20.0,
    lane_offset_m: float = 0.0,
    lane_separation_m: float = 0.0,
) -> list[AisRecord]:
    """Position reports for ``n_trips`` voyages spread over ``n_vessels`` vessels.

    ``lane_offset_m`` shifts all traffic sideways off the centreline;
    ``lane_separation_m`` splits the two directions into starboard-side lanes
    that far apart.
    """
    rng = np.random.default_rng(seed)
    cx, cy = corridor.centreline()
    seg = np.hypot(np.diff(cx), np.diff(cy))
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    tx, ty = np.gradient(cx), np.gradient(cy)
    norm = np.hypot(tx, ty)
    nx, ny = -ty / norm, tx / norm
    total = arc[-1]
    clock = {v: T0_MS + int(rng.integers(0, 3_600_000)) for v in range(n_vessels)}
    records: list[AisRecord] = []
    for k in range(n_trips):
        v = k % n_vessels
        vessel_id = f"2190{v:05d}"
        speed = rng.uniform(*speed_knots) * METERS_PER_NM / 3600.0
        reverse = bool(k % 2)
        # the normal points to port of the forward direction
        side = 0.5 * lane_separation_m * (1.0 if reverse else -1.0)
        offset = lane_offset_m + side + rng.normal(0.0, lane_sigma_m)
        duration = total / speed
        times = [0.0]
        while times[-1] < duration:
            times.append(times[-1] + report_interval_s * rng.uniform(0.8, 1.2))
        times[-1] = duration
        t = np.array(times)
        s = t * speed
        if reverse:
            s = total - s
        px = np.interp(s, arc, cx) + np.interp(s, arc, nx) * (offset + rng.normal(0, point_sigma_m, t.size))
        py = np.interp(s, arc, cy) + np.interp(s, arc, ny) * (offset + rng.normal(0, point_sigma_m, t.size))
        lon, lat = corridor.to_lonlat(px, py)
        sog = speed * 3600.0 / METERS_PER_NM
        start = clock[v]
        for ti, lo, la in zip(t, lon, lat):
            records.append(AisRecord(vessel_id, start + int(round(ti * 1000)), float(lo), float(la),
                                     round(float(sog + rng.normal(0, 0.1)), 2), None))
        clock[v] = start + int(duration * 1000) + 3 * 3_600_000
    return records


def corridor_trips(n_trips: int = 200, corridor: Corridor = Corridor(), seed: int = 0, **kwargs) -> list[Trip]:
    """:func:`corridor_records` run through the cleaning/segmentation pipeline."""
    recs = corridor_records(n_trips, corridor, seed, **kwargs)
    return segment_corpus(recs, SegmenterConfig()).trips
