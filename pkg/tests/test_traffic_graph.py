import math
import random

import h3.api.basic_int as h3
import pytest
from hypothesis import given, settings, strategies as st

from oracles import gc_distance, h3o_boundaries, h3o_disk_distances
from vesselgap.eval_harness import build_from_trips
from vesselgap.h3_aggregator import CellStats, TransitionStats, grid_distance
from vesselgap.traffic_graph import (
    EdgeAttrs,
    GraphBuildError,
    GraphFormatError,
    NodeAttrs,
    NodeNotFound,
    TrafficGraph,
    build_graph,
    graph_from_bytes,
    graph_to_bytes,
    graph_to_geojson,
    load_graph,
    nearest_node,
    save_graph,
)

ORIGIN = h3.latlng_to_cell(55.5, 11.0, 9)


def stats(c, n=3):
    lat, lon = h3.cell_to_latlng(c)
    return CellStats(c, n, 1, lon, lat)


def abc():
    a = ORIGIN
    b = sorted(h3.grid_ring(a, 1))[0]
    c = sorted(h3.grid_ring(b, 1))[-1]
    d = sorted(h3.grid_ring(a, 4))[0]
    return a, b, c, d


def test_build_direct_assembly():
    a, b, c, d = abc()
    cells = {x: stats(x) for x in (a, b, c, d)}
    trans = {(a, b): TransitionStats(a, b, 7, 1), (b, c): TransitionStats(b, c, 2, 1)}
    g = build_graph(cells, trans)
    assert set(g.nodes) == {a, b, c}
    assert d not in g.nodes  # isolated cell
    assert g.edges[(a, b)] == EdgeAttrs(7, 1)
    assert g.nodes[a] == NodeAttrs(cells[a].median_lon, cells[a].median_lat, 3, 1)


def test_build_missing_endpoint():
    a, b, _, _ = abc()
    with pytest.raises(GraphBuildError, match=h3.int_to_str(b)):
        build_graph({a: stats(a)}, {(a, b): TransitionStats(a, b, 1, 1)})


def test_graph_rejects_self_loop():
    a = ORIGIN
    with pytest.raises(GraphBuildError):
        TrafficGraph(9, {a: NodeAttrs(0, 0, 1, 1)}, {(a, a): EdgeAttrs(1, 1)})


def random_graph(seed, n_nodes=30, n_edges=80, r=9):
    rng = random.Random(seed)
    disk = sorted(h3.grid_disk(h3.latlng_to_cell(55.5, 11.0, r), 6))
    nodes = rng.sample(disk, n_nodes)
    edges = {}
    while len(edges) < n_edges:
        u, v = rng.sample(nodes, 2)
        edges[(u, v)] = EdgeAttrs(rng.randint(1, 20), grid_distance(u, v))
    attrs = {}
    for c in nodes:
        lat, lon = h3.cell_to_latlng(c)
        attrs[c] = NodeAttrs(lon + rng.uniform(-1e-3, 1e-3), lat + rng.uniform(-1e-3, 1e-3),
                             rng.randint(1, 1000), rng.randint(1, 50),
                             rng.choice([None, rng.uniform(0, 20)]), rng.choice([None, rng.uniform(0, 359)]))
    return TrafficGraph(r, attrs, edges, {"seed": seed, "created_at": "2024-01-01T00:00:00+00:00"})


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_roundtrip(tmp_path_factory, seed):
    g = random_graph(seed)
    path = tmp_path_factory.mktemp("g") / "g.vgtg"
    size = save_graph(g, path)
    assert size == path.stat().st_size
    assert load_graph(path) == g


def test_empty_graph_roundtrip():
    g = build_graph({}, {}, resolution=9)
    g2 = graph_from_bytes(graph_to_bytes(g))
    assert g2 == g and not g2.nodes and not g2.edges


def test_corrupt_files():
    data = bytearray(graph_to_bytes(random_graph(1)))
    bad_magic = bytes([data[0] ^ 0xFF]) + bytes(data[1:])
    with pytest.raises(GraphFormatError, match="magic"):
        graph_from_bytes(bad_magic)
    flipped = bytearray(data)
    flipped[len(flipped) // 2] ^= 0x01
    with pytest.raises(GraphFormatError, match="checksum"):
        graph_from_bytes(bytes(flipped))
    with pytest.raises(GraphFormatError):
        graph_from_bytes(bytes(data[:20]))
    wrong_version = bytearray(data)
    wrong_version[4] = 99
    with pytest.raises(GraphFormatError, match="version"):
        graph_from_bytes(bytes(wrong_version))


def test_nearest_node_identity_and_single_neighbour():
    g = random_graph(3)
    for n in g.nodes:
        assert nearest_node(g, n) == n
    a = ORIGIN
    b = sorted(h3.grid_ring(a, 1))[2]
    g1 = TrafficGraph(9, {b: NodeAttrs(*reversed(h3.cell_to_latlng(b)), 1, 1)}, {})
    assert nearest_node(g1, a) == b


def destination(lat, lon, bearing_deg, dist_m):
    R = 6371008.8
    d = dist_m / R
    p, l, th = math.radians(lat), math.radians(lon), math.radians(bearing_deg)
    p2 = math.asin(math.sin(p) * math.cos(d) + math.cos(p) * math.sin(d) * math.cos(th))
    l2 = l + math.atan2(math.sin(th) * math.sin(d) * math.cos(p), math.cos(d) - math.sin(p) * math.sin(p2))
    return math.degrees(p2), math.degrees(l2)


def brute_nearest(g, q, k_max):
    lat0, lon0 = h3.cell_to_latlng(q)
    dist = h3o_disk_distances(q, k_max)
    cands = [(dist[n], gc_distance(lat0, lon0, a.median_lat, a.median_lon), n) for n, a in g.nodes.items() if n in dist]
    return min(cands)[2] if cands else None


def test_nearest_node_ring_then_geodesic():
    q = ORIGIN
    ring2 = sorted(h3.grid_ring(q, 2))
    lat0, lon0 = h3.cell_to_latlng(q)
    n_near, n_far = ring2[0], ring2[5]
    la1, lo1 = destination(lat0, lon0, 30, 400)
    la2, lo2 = destination(lat0, lon0, 200, 900)
    g = TrafficGraph(9, {n_far: NodeAttrs(lo1, la1, 1, 1), n_near: NodeAttrs(lo2, la2, 1, 1)}, {})
    assert nearest_node(g, q) == n_far == brute_nearest(g, q, 16)


def test_nearest_node_not_found():
    g = TrafficGraph(9, {sorted(h3.grid_ring(ORIGIN, 5))[0]: NodeAttrs(11, 55.5, 1, 1)}, {})
    with pytest.raises(NodeNotFound):
        nearest_node(g, ORIGIN, k_max=2)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 126))
def test_nearest_node_matches_brute_force(seed, qi):
    g = random_graph(seed, n_nodes=8, n_edges=4)
    disk = sorted(h3.grid_disk(ORIGIN, 6))
    q = disk[qi % len(disk)]
    assert nearest_node(g, q, 12) == brute_nearest(g, q, 12)


def test_grid_distance_basics():
    a = ORIGIN
    assert grid_distance(a, a) == 0
    assert all(grid_distance(a, b) == 1 for b in h3.grid_ring(a, 1))
    ref = h3o_disk_distances(a, 8)
    for b, d in random.Random(0).sample(sorted(ref.items()), 50):
        assert grid_distance(a, b) == d


def test_file_size_grows_with_resolution(small_corpus):
    sizes = [len(graph_to_bytes(build_from_trips(small_corpus, r))) for r in range(6, 11)]
    assert all(b > a for a, b in zip(sizes, sizes[1:]))


def test_rebuild_byte_identical(small_corpus):
    meta = {"created_at": "fixed"}
    b1 = graph_to_bytes(build_from_trips(small_corpus, 9, meta))
    b2 = graph_to_bytes(build_from_trips(list(small_corpus), 9, meta))
    assert b1 == b2


def test_edge_weights_match_recount(small_corpus):
    g = build_from_trips(small_corpus, 8)
    counts = {}
    for t in small_corpus:
        cells = [h3.latlng_to_cell(p.lat, p.lon, 8) for p in t.points]
        for pair in {(u, v) for u, v in zip(cells, cells[1:]) if u != v}:
            counts[pair] = counts.get(pair, 0) + 1
    assert {k: e.weight for k, e in g.edges.items()} == counts


def test_geojson_polygons_match_reference():
    g = random_graph(5)
    fc = graph_to_geojson(g)
    assert fc["type"] == "FeatureCollection" and len(fc["features"]) == len(g.nodes)
    cells = sorted(g.nodes)
    for feat, ref in zip(fc["features"], h3o_boundaries(cells)):
        ring = feat["geometry"]["coordinates"][0]
        assert ring[0] == ring[-1]
        got = [(lat, lon) for lon, lat in ring[:-1]]
        assert len(got) == len(ref)
        for p in ref:
            assert min(math.hypot(p[0] - q[0], p[1] - q[1]) for q in got) < 1e-9
    assert graph_to_geojson(build_graph({}, {}, resolution=9))["features"] == []
