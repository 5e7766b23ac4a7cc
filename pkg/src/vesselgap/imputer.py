"""Gap imputation over a :class:`TrafficGraph` plus the straight-line baseline."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import h3.api.basic_int as h3
import numpy as np
from h3 import H3BaseException

from .ais_model import GeoPoint, format_timestamp
from .geo import haversine, interpolate, segment_distance, segment_distance_np
from .h3_aggregator import CellId, assign_cell, cell_center, cell_to_str
from .traffic_graph import NodeNotFound, TrafficGraph, nearest_node

Projection = Literal["c", "w"]
CostMode = Literal["hops", "inverse_frequency"]


class OffNetworkError(LookupError):
    """A gap endpoint has no graph node within the search radius."""


class UnreachableError(LookupError):
    """No directed path joins the two endpoint nodes."""


@dataclass(frozen=True)
class Gap:
    start: GeoPoint
    end: GeoPoint
    vessel_id: str = ""
    trip_id: str = ""

    def __post_init__(self):
        if self.start.ts is None or self.end.ts is None:
            raise ValueError("gap endpoints need timestamps")
        if not self.start.ts < self.end.ts:
            raise ValueError("gap start must precede gap end")


@dataclass(frozen=True)
class ImputeConfig:
    projection: Projection = "w"
    tolerance: float = 250.0  # meters
    cost_mode: CostMode = "hops"
    k_max: int = 16
    fallback: Literal["error", "straight_line"] = "straight_line"
    fallback_spacing: float = 250.0  # meters, for straight-line fallback

    def __post_init__(self):
        if self.projection not in ("c", "w"):
            raise ValueError(f"projection must be 'c' or 'w', got {self.projection!r}")
        if self.cost_mode not in ("hops", "inverse_frequency"):
            raise ValueError(f"unknown cost_mode {self.cost_mode!r}")
        if self.fallback not in ("error", "straight_line"):
            raise ValueError(f"unknown fallback {self.fallback!r}")
        if not self.tolerance >= 0:
            raise ValueError("tolerance must be >= 0")
        if self.k_max < 0:
            raise ValueError("k_max must be >= 0")


@dataclass
class ImputedPath:
    points: list[GeoPoint]
    cell_path: list[CellId] = field(default_factory=list)
    method: Literal["habit", "sli"] = "habit"
    fallback_used: bool = False
    fallback_reason: str | None = None

    def to_feature(self, properties: dict | None = None) -> dict:
        props = {
            "method": self.method,
            "fallback_used": self.fallback_used,
            "timestamps": [format_timestamp(p.ts) for p in self.points],
            "cells": [cell_to_str(c) for c in self.cell_path],
        }
        if self.fallback_reason:
            props["fallback_reason"] = self.fallback_reason
        props.update(properties or {})
        return {
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": [[p.lon, p.lat] for p in self.points]},
            "properties": props,
        }


def map_endpoint(g: TrafficGraph, pt: GeoPoint, cfg: ImputeConfig = ImputeConfig()) -> CellId:
    cell = assign_cell(pt.lat, pt.lon, g.resolution)
    if cell in g.nodes:
        return cell
    try:
        return nearest_node(g, cell, cfg.k_max)
    except NodeNotFound as exc:
        raise OffNetworkError(str(exc)) from None


def _hops_heuristic(g: TrafficGraph, goal: CellId, step_floor: int):
    d_max = g.max_edge_grid_dist
    cache: dict[CellId, int] = {}

    def h(n: CellId) -> int:
        v = cache.get(n)
        if v is None:
            try:
                v = step_floor * -(-h3.grid_distance(n, goal) // d_max)
            except H3BaseException:
                v = 0
            cache[n] = v
        return v

    return h


def find_cell_path(
    g: TrafficGraph, start: CellId, goal: CellId, cost_mode: CostMode = "hops"
) -> list[CellId]:
    """Best directed cell path from ``start`` to ``goal``.

    ``hops`` minimises the number of transitions and, among those, maximises
    the summed edge weight. It is run as A* on the integer edge cost
    ``M - weight`` with ``M`` above any path's total weight, which makes the
    lexicographic objective a single additive one. ``inverse_frequency``
    minimises the sum of ``1/weight`` (uniform-cost search). Remaining ties
    go to the lexicographically smallest cell sequence.
    """
    if start not in g.nodes or goal not in g.nodes:
        raise ValueError("start and goal must be graph nodes")
    if start == goal:
        return [start]
    succ = g.successors
    if cost_mode == "hops":
        big_m = len(g.nodes) * g.max_weight + 1
        h = _hops_heuristic(g, goal, big_m - g.max_weight)

        def label_step(label, w):
            return label + (big_m - w)

        zero = 0
    elif cost_mode == "inverse_frequency":
        def h(n):
            return 0

        def label_step(label, w):
            return (label[0] + 1.0 / w, label[1] - w)

        zero = (0.0, 0)
    else:
        raise ValueError(f"unknown cost_mode {cost_mode!r}")

    best = {start: zero}
    parent: dict[CellId, CellId | None] = {start: None}
    settled: set[CellId] = set()

    def path_to(n):
        out = []
        while n is not None:
            out.append(n)
            n = parent[n]
        return out[::-1]

    # Ties on f are broken by smaller label so every equal-label predecessor of
    # a node is expanded before the node itself.
    def f_of(label, n):
        return label + h(n) if cost_mode == "hops" else label[0]

    heap = [(f_of(zero, start), zero, start)]
    while heap:
        _, label, u = heapq.heappop(heap)
        if u in settled or label != best[u]:
            continue
        settled.add(u)
        if u == goal:
            return path_to(goal)
        for v, w, _gd in succ[u]:
            if v in settled:
                continue
            cand = label_step(label, w)
            cur = best.get(v)
            if cur is None or cand < cur:
                best[v] = cand
                parent[v] = u
                heapq.heappush(heap, (f_of(cand, v), cand, v))
            elif cand == cur and path_to(u) < path_to(parent[v]):
                parent[v] = u
    raise UnreachableError(f"{cell_to_str(goal)} is unreachable from {cell_to_str(start)}")


def path_cost(g: TrafficGraph, cells: Sequence[CellId], cost_mode: CostMode = "hops") -> tuple[float, int]:
    """``(primary cost, summed weight)`` of a cell path under ``cost_mode``."""
    total_w = 0
    inv = 0.0
    for u, v in zip(cells, cells[1:]):
        w = g.edges[(u, v)].weight
        total_w += w
        inv += 1.0 / w
    primary = len(cells) - 1 if cost_mode == "hops" else inv
    return primary, total_w


def project_path(g: TrafficGraph, cells: Sequence[CellId], p: Projection = "w") -> list[GeoPoint]:
    """Cell sequence back to coordinates: cell centres (``c``) or data medians (``w``)."""
    out = []
    for c in cells:
        if p == "c":
            lat, lon = cell_center(c)
            out.append(GeoPoint(lon, lat))
        elif p == "w":
            a = g.nodes[c]
            out.append(GeoPoint(a.median_lon, a.median_lat))
        else:
            raise ValueError(f"projection must be 'c' or 'w', got {p!r}")
    return out


_SCALAR_SPAN = 24  # below this many points plain math beats numpy call overhead


def rdp_keep_mask(lats: np.ndarray, lons: np.ndarray, t: float) -> np.ndarray:
    n = len(lats)
    keep = np.zeros(n, dtype=bool)
    if n == 0:
        return keep
    keep[0] = keep[-1] = True
    lat_l, lon_l = lats.tolist(), lons.tolist()
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        if j - i <= _SCALAR_SPAN:
            d = [segment_distance(lat_l[m], lon_l[m], lat_l[i], lon_l[i], lat_l[j], lon_l[j]) for m in range(i + 1, j)]
            k = max(range(len(d)), key=d.__getitem__)
        else:
            d = segment_distance_np(lats[i + 1 : j], lons[i + 1 : j], lats[i], lons[i], lats[j], lons[j])
            k = int(np.argmax(d))
        if d[k] > t:
            k += i + 1
            keep[k] = True
            stack.append((i, k))
            stack.append((k, j))
    return keep


def simplify_rdp(points: Sequence[GeoPoint], t: float) -> list[GeoPoint]:
    """Ramer-Douglas-Peucker with great-circle deviation in meters."""
    if t < 0:
        raise ValueError("tolerance must be >= 0")
    if len(points) <= 2:
        return list(points)
    lats = np.array([p.lat for p in points])
    lons = np.array([p.lon for p in points])
    keep = rdp_keep_mask(lats, lons, t)
    return [p for p, k in zip(points, keep) if k]


def _timestamp(points: Sequence[GeoPoint], t0: int, t1: int) -> list[GeoPoint]:
    """Timestamps proportional to cumulative arc length; drops points that
    cannot get a strictly increasing millisecond timestamp."""
    arc = [0.0]
    for a, b in zip(points, points[1:]):
        arc.append(arc[-1] + haversine(a.lat, a.lon, b.lat, b.lon))
    total = arc[-1]
    n = len(points)
    out = [GeoPoint(points[0].lon, points[0].lat, t0)]
    for i in range(1, n - 1):
        frac = arc[i] / total if total > 0 else i / (n - 1)
        ts = t0 + int(round((t1 - t0) * frac))
        if out[-1].ts < ts < t1:
            out.append(GeoPoint(points[i].lon, points[i].lat, ts))
    out.append(GeoPoint(points[-1].lon, points[-1].lat, t1))
    return out


def impute_sli(gap: Gap, max_spacing: float = 250.0) -> ImputedPath:
    """Great-circle chord between the endpoints, sampled every ``max_spacing`` m or closer."""
    s, e = gap.start, gap.end
    d = haversine(s.lat, s.lon, e.lat, e.lon)
    n_seg = max(1, math.ceil(d / max_spacing - 1e-9)) if max_spacing > 0 else 1
    pts = [GeoPoint(s.lon, s.lat)]
    for i in range(1, n_seg):
        lat, lon = interpolate(s.lat, s.lon, e.lat, e.lon, i / n_seg)
        pts.append(GeoPoint(lon, lat))
    pts.append(GeoPoint(e.lon, e.lat))
    return ImputedPath(_timestamp(pts, s.ts, e.ts), [], "sli", False)


def impute_gap(g: TrafficGraph, gap: Gap, cfg: ImputeConfig = ImputeConfig()) -> ImputedPath:
    try:
        a = map_endpoint(g, gap.start, cfg)
        b = map_endpoint(g, gap.end, cfg)
        cells = find_cell_path(g, a, b, cfg.cost_mode)
    except (OffNetworkError, UnreachableError) as exc:
        if cfg.fallback == "error":
            raise
        out = impute_sli(gap, cfg.fallback_spacing)
        out.fallback_used = True
        out.fallback_reason = f"{type(exc).__name__}: {exc}"
        return out
    projected = simplify_rdp(project_path(g, cells, cfg.projection), cfg.tolerance)
    pts = [GeoPoint(gap.start.lon, gap.start.lat)] + projected[1:-1] + [GeoPoint(gap.end.lon, gap.end.lat)]
    return ImputedPath(_timestamp(pts, gap.start.ts, gap.end.ts), cells, "habit", False)
