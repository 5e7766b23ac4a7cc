"""Weighted directed cell-transition graph: assembly, persistence and lookups.

Graph file layout (all integers little-endian)::

    0   4   magic  b"VGTG"
    4   2   format version (u16)
    6   2   reserved, zero
    8   4   header length H (u32)
    12  H   UTF-8 JSON header (resolution, counts, metadata), sorted keys
    ..      node table, n rows, one contiguous column at a time:
              cell u64 | median_lon f64 | median_lat f64 | msg_count u32 |
              distinct_vessels u32 | median_sog f64 | median_cog f64
            (absent sog/cog stored as NaN)
    ..      edge table, m rows, columnar: src u64 | dst u64 | weight u32 | grid_dist u32
    -4  4   CRC-32 of every preceding byte (u32)

Rows are sorted by cell id (nodes) and (src, dst) (edges), so identical
inputs produce identical bytes apart from the metadata timestamp.
"""

from __future__ import annotations

import csv
import json
import math
import struct
import zlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import cached_property
from pathlib import Path
from typing import Mapping

import h3.api.basic_int as h3
import numpy as np

from .geo import haversine
from .h3_aggregator import CellId, CellStats, TransitionStats, cell_boundary, cell_to_str, grid_distance

MAGIC = b"VGTG"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sHHI")

NODE_COLUMNS = [
    ("cell", "<u8"),
    ("median_lon", "<f8"),
    ("median_lat", "<f8"),
    ("msg_count", "<u4"),
    ("distinct_vessels", "<u4"),
    ("median_sog", "<f8"),
    ("median_cog", "<f8"),
]
EDGE_COLUMNS = [("src", "<u8"), ("dst", "<u8"), ("weight", "<u4"), ("grid_dist", "<u4")]


class GraphBuildError(ValueError):
    pass


class GraphFormatError(ValueError):
    """Graph file is truncated, corrupt or of an unsupported version."""


class NodeNotFound(LookupError):
    pass


@dataclass(frozen=True)
class NodeAttrs:
    median_lon: float
    median_lat: float
    msg_count: int
    distinct_vessels: int
    median_sog: float | None = None
    median_cog: float | None = None


@dataclass(frozen=True)
class EdgeAttrs:
    weight: int
    grid_dist: int


@dataclass(eq=False)
class TrafficGraph:
    resolution: int
    nodes: dict[CellId, NodeAttrs] = field(default_factory=dict)
    edges: dict[tuple[CellId, CellId], EdgeAttrs] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.check()

    def check(self) -> None:
        for (u, v) in self.edges:
            if u == v:
                raise GraphBuildError(f"self-loop on {cell_to_str(u)}")
            for c in (u, v):
                if c not in self.nodes:
                    raise GraphBuildError(f"edge endpoint {cell_to_str(c)} is not a node")
        for c in self.nodes:
            if h3.get_resolution(c) != self.resolution:
                raise GraphBuildError(f"node {cell_to_str(c)} not at resolution {self.resolution}")

    def __eq__(self, other):
        if not isinstance(other, TrafficGraph):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and self.nodes == other.nodes
            and self.edges == other.edges
            and self.metadata == other.metadata
        )

    @cached_property
    def successors(self) -> dict[CellId, list[tuple[CellId, int, int]]]:
        """``u -> [(v, weight, grid_dist), ...]`` sorted by ``v``."""
        out: dict[CellId, list[tuple[CellId, int, int]]] = {u: [] for u in self.nodes}
        for (u, v), e in sorted(self.edges.items()):
            out[u].append((v, e.weight, e.grid_dist))
        return out

    @cached_property
    def max_edge_grid_dist(self) -> int:
        return max((e.grid_dist for e in self.edges.values()), default=1)

    @cached_property
    def max_weight(self) -> int:
        return max((e.weight for e in self.edges.values()), default=1)

    def summary(self) -> dict:
        return {"resolution": self.resolution, "nodes": len(self.nodes), "edges": len(self.edges)}


def build_graph(
    cells: Mapping[CellId, CellStats],
    transitions: Mapping[tuple[CellId, CellId], TransitionStats],
    resolution: int | None = None,
    metadata: dict | None = None,
) -> TrafficGraph:
    """Nodes are the cells referenced by at least one transition."""
    node_ids: set[CellId] = set()
    for (u, v) in transitions:
        for c in (u, v):
            if c not in cells:
                raise GraphBuildError(f"transition endpoint {cell_to_str(c)} has no cell statistics")
            node_ids.add(c)
    if resolution is None:
        sample = next(iter(cells), None)
        if sample is None:
            raise GraphBuildError("resolution required for an empty graph")
        resolution = h3.get_resolution(sample)
    nodes = {}
    for c in sorted(node_ids):
        s = cells[c]
        nodes[c] = NodeAttrs(s.median_lon, s.median_lat, s.msg_count, s.distinct_vessels, s.median_sog, s.median_cog)
    edges = {pair: EdgeAttrs(t.trip_count, t.grid_dist) for pair, t in sorted(transitions.items())}
    meta = {"created_at": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    meta.update(metadata or {})
    return TrafficGraph(resolution, nodes, edges, meta)


def _opt(x: float) -> float | None:
    return None if math.isnan(x) else float(x)


def graph_to_bytes(g: TrafficGraph) -> bytes:
    node_ids = sorted(g.nodes)
    edge_ids = sorted(g.edges)
    header = json.dumps(
        {"resolution": g.resolution, "n_nodes": len(node_ids), "n_edges": len(edge_ids), "metadata": g.metadata},
        sort_keys=True,
        separators=(",", ":"),
    ).encode()
    nan = float("nan")
    node_cols = {
        "cell": node_ids,
        "median_lon": [g.nodes[c].median_lon for c in node_ids],
        "median_lat": [g.nodes[c].median_lat for c in node_ids],
        "msg_count": [g.nodes[c].msg_count for c in node_ids],
        "distinct_vessels": [g.nodes[c].distinct_vessels for c in node_ids],
        "median_sog": [nan if g.nodes[c].median_sog is None else g.nodes[c].median_sog for c in node_ids],
        "median_cog": [nan if g.nodes[c].median_cog is None else g.nodes[c].median_cog for c in node_ids],
    }
    edge_cols = {
        "src": [u for u, _ in edge_ids],
        "dst": [v for _, v in edge_ids],
        "weight": [g.edges[k].weight for k in edge_ids],
        "grid_dist": [g.edges[k].grid_dist for k in edge_ids],
    }
    parts = [_PREFIX.pack(MAGIC, FORMAT_VERSION, 0, len(header)), header]
    for name, dtype in NODE_COLUMNS:
        parts.append(np.asarray(node_cols[name], dtype=dtype).tobytes())
    for name, dtype in EDGE_COLUMNS:
        parts.append(np.asarray(edge_cols[name], dtype=dtype).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def graph_from_bytes(data: bytes) -> TrafficGraph:
    if len(data) < _PREFIX.size + 4:
        raise GraphFormatError("file too short")
    magic, version, _, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise GraphFormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise GraphFormatError(f"unsupported format version {version}")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise GraphFormatError("checksum mismatch")
    off = _PREFIX.size
    try:
        header = json.loads(data[off : off + hlen])
        n, m = int(header["n_nodes"]), int(header["n_edges"])
    except (ValueError, KeyError, TypeError) as exc:
        raise GraphFormatError(f"bad header: {exc}") from None
    off += hlen

    def take(count, dtype):
        nonlocal off
        size = count * np.dtype(dtype).itemsize
        if off + size > len(body):
            raise GraphFormatError("truncated table")
        arr = np.frombuffer(body, dtype=dtype, count=count, offset=off)
        off += size
        return arr

    nc = {name: take(n, dt) for name, dt in NODE_COLUMNS}
    ec = {name: take(m, dt) for name, dt in EDGE_COLUMNS}
    if off != len(body):
        raise GraphFormatError("trailing bytes")
    nodes = {
        int(nc["cell"][i]): NodeAttrs(
            float(nc["median_lon"][i]),
            float(nc["median_lat"][i]),
            int(nc["msg_count"][i]),
            int(nc["distinct_vessels"][i]),
            _opt(nc["median_sog"][i]),
            _opt(nc["median_cog"][i]),
        )
        for i in range(n)
    }
    edges = {
        (int(ec["src"][i]), int(ec["dst"][i])): EdgeAttrs(int(ec["weight"][i]), int(ec["grid_dist"][i]))
        for i in range(m)
    }
    try:
        return TrafficGraph(int(header["resolution"]), nodes, edges, header.get("metadata", {}))
    except GraphBuildError as exc:
        raise GraphFormatError(f"inconsistent graph: {exc}") from None


def save_graph(g: TrafficGraph, path: str | Path) -> int:
    """Write ``g`` to ``path``; returns the file size in bytes."""
    data = graph_to_bytes(g)
    Path(path).write_bytes(data)
    return len(data)


def load_graph(path: str | Path) -> TrafficGraph:
    return graph_from_bytes(Path(path).read_bytes())


def export_csv(g: TrafficGraph, nodes_path: str | Path, edges_path: str | Path) -> None:
    """Plain-text node list and edge list (cells as H3 hex strings)."""
    with open(nodes_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell", "median_lon", "median_lat", "msg_count", "distinct_vessels", "median_sog", "median_cog"])
        for c in sorted(g.nodes):
            a = g.nodes[c]
            w.writerow([cell_to_str(c), repr(a.median_lon), repr(a.median_lat), a.msg_count, a.distinct_vessels,
                        "" if a.median_sog is None else repr(a.median_sog),
                        "" if a.median_cog is None else repr(a.median_cog)])
    with open(edges_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst", "weight", "grid_dist"])
        for (u, v) in sorted(g.edges):
            e = g.edges[(u, v)]
            w.writerow([cell_to_str(u), cell_to_str(v), e.weight, e.grid_dist])


def _ring(cell: CellId, k: int) -> set[CellId]:
    try:
        return set(h3.grid_ring(cell, k))
    except Exception:  # pentagon distortion
        return set(h3.grid_disk(cell, k)) - set(h3.grid_disk(cell, k - 1))


def nearest_node(g: TrafficGraph, cell: CellId, k_max: int = 16) -> CellId:
    """The node closest to ``cell``: smallest ring first, then geodesic distance, then id."""
    if h3.get_resolution(cell) != g.resolution:
        raise ValueError(f"cell resolution {h3.get_resolution(cell)} != graph resolution {g.resolution}")
    if cell in g.nodes:
        return cell
    lat0, lon0 = h3.cell_to_latlng(cell)
    for k in range(1, k_max + 1):
        found = [c for c in _ring(cell, k) if c in g.nodes]
        if found:
            return min(found, key=lambda c: (haversine(lat0, lon0, g.nodes[c].median_lat, g.nodes[c].median_lon), c))
    raise NodeNotFound(f"no graph node within {k_max} rings of {cell_to_str(cell)}")


def graph_to_geojson(g: TrafficGraph) -> dict:
    """Node cells as RFC 7946 polygons carrying their traffic statistics."""
    features = []
    for c in sorted(g.nodes):
        a = g.nodes[c]
        ring = [[lng, lat] for lat, lng in cell_boundary(c)]
        ring.append(ring[0])
        features.append({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [ring]},
            "properties": {
                "cell": cell_to_str(c),
                "msg_count": a.msg_count,
                "distinct_vessels": a.distinct_vessels,
                "median_lon": a.median_lon,
                "median_lat": a.median_lat,
            },
        })
    return {"type": "FeatureCollection", "features": features}


__all__ = [
    "EdgeAttrs", "GraphBuildError", "GraphFormatError", "NodeAttrs", "NodeNotFound", "TrafficGraph",
    "build_graph", "export_csv", "graph_from_bytes", "graph_to_bytes", "graph_to_geojson", "grid_distance",
    "load_graph", "nearest_node", "save_graph",
]
