"""Independent reference computations used to check the package.

Nothing here imports the geometry or search code under test: distances use
3-D unit vectors instead of spherical trigonometry, path costs come from
Bellman-Ford or exhaustive enumeration instead of A*, DTW from plain
recursion, and H3 answers from h3ronpy (a separate H3 implementation).
"""

from __future__ import annotations

import functools
import math

import numpy as np

R = 6371008.8


def unit(lat, lon):
    p, l = math.radians(lat), math.radians(lon)
    return np.array([math.cos(p) * math.cos(l), math.cos(p) * math.sin(l), math.sin(p)])


def gc_distance(lat1, lon1, lat2, lon2) -> float:
    a, b = unit(lat1, lon1), unit(lat2, lon2)
    return R * math.atan2(np.linalg.norm(np.cross(a, b)), float(np.dot(a, b)))


def arc_distance(lat, lon, lat_a, lon_a, lat_b, lon_b) -> float:
    """Distance from a point to the minor great-circle arc a-b."""
    p, a, b = unit(lat, lon), unit(lat_a, lon_a), unit(lat_b, lon_b)
    n = np.cross(a, b)
    nn = np.linalg.norm(n)
    d_end = min(gc_distance(lat, lon, lat_a, lon_a), gc_distance(lat, lon, lat_b, lon_b))
    if nn < 1e-15:
        return d_end
    n /= nn
    q = p - np.dot(p, n) * n
    qn = np.linalg.norm(q)
    if qn < 1e-15:
        return d_end
    q /= qn
    # q lies on the arc iff it is on the inner side of both endpoint planes
    if np.dot(np.cross(a, q), n) >= 0 and np.dot(np.cross(q, b), n) >= 0:
        return R * abs(math.asin(max(-1.0, min(1.0, float(np.dot(p, n))))))
    return d_end


def _units(lat, lon):
    p, l = np.radians(lat), np.radians(lon)
    return np.stack([np.cos(p) * np.cos(l), np.cos(p) * np.sin(l), np.sin(p)], axis=-1)


def _angle(a, b):
    return np.arctan2(np.linalg.norm(np.cross(a, b), axis=-1), np.einsum("...i,...i", a, b))


def arc_distance_np(lat, lon, lat_a, lon_a, lat_b, lon_b) -> np.ndarray:
    """Vectorised :func:`arc_distance` (all arguments broadcast)."""
    p, a, b = _units(lat, lon), _units(lat_a, lon_a), _units(lat_b, lon_b)
    p, a, b = np.broadcast_arrays(p, a, b)
    d_end = np.minimum(_angle(p, a), _angle(p, b))
    n = np.cross(a, b)
    nn = np.linalg.norm(n, axis=-1, keepdims=True)
    n = n / np.where(nn < 1e-15, 1.0, nn)
    q = p - np.einsum("...i,...i", p, n)[..., None] * n
    inside = (np.einsum("...i,...i", np.cross(a, q), n) >= 0) & (np.einsum("...i,...i", np.cross(q, b), n) >= 0)
    inside &= (nn[..., 0] >= 1e-15) & (np.linalg.norm(q, axis=-1) >= 1e-15)
    cross = np.abs(np.arcsin(np.clip(np.einsum("...i,...i", p, n), -1.0, 1.0)))
    return R * np.where(inside, cross, d_end)


def chain_distance(lat, lon, chain) -> float:
    return min(arc_distance(lat, lon, a[0], a[1], b[0], b[1]) for a, b in zip(chain, chain[1:]))


def bearing(lat1, lon1, lat2, lon2) -> float:
    """Initial bearing via the local east/north frame at point 1."""
    a, b = unit(lat1, lon1), unit(lat2, lon2)
    north_pole = np.array([0.0, 0.0, 1.0])
    east = np.cross(north_pole, a)
    east /= np.linalg.norm(east)
    north = np.cross(a, east)
    d = b - a
    return math.degrees(math.atan2(np.dot(d, east), np.dot(d, north))) % 360.0


def dtw_reference(a, b) -> float:
    """(lat, lon) sequences; min total cost, ties to the shortest warping path."""
    n, m = len(a), len(b)

    @functools.lru_cache(maxsize=None)
    def best(i, j):
        d = gc_distance(a[i][0], a[i][1], b[j][0], b[j][1])
        if i == 0 and j == 0:
            return (d, 1)
        options = []
        if i > 0:
            options.append(best(i - 1, j))
        if j > 0:
            options.append(best(i, j - 1))
        if i > 0 and j > 0:
            options.append(best(i - 1, j - 1))
        c, s = min(options)
        return (c + d, s + 1)

    c, s = best(n - 1, m - 1)
    return c / s


def bellman_ford(nodes, edges, start, cost_mode):
    """Optimal objective per node. ``edges`` is ``{(u, v): weight}``.

    hops: minimise (hops, -total weight) lexicographically.
    inverse_frequency: minimise sum of 1/weight, then -total weight.
    """
    inf = (math.inf, math.inf)
    dist = {n: inf for n in nodes}
    dist[start] = (0, 0) if cost_mode == "hops" else (0.0, 0)
    for _ in range(len(nodes)):
        changed = False
        for (u, v), w in edges.items():
            du = dist[u]
            if du == inf:
                continue
            step = 1 if cost_mode == "hops" else 1.0 / w
            cand = (du[0] + step, du[1] - w)
            if cand[0] < dist[v][0] - 1e-12 or (abs(cand[0] - dist[v][0]) <= 1e-12 and cand[1] < dist[v][1]):
                dist[v] = cand
                changed = True
        if not changed:
            break
    return dist


def enumerate_best_path(nodes, edges, start, goal, cost_mode):
    """Exhaustive search over simple paths (tiny graphs only)."""
    succ = {n: sorted(v for (u, v) in edges if u == n) for n in nodes}
    best = None

    def key(path):
        ws = [edges[(u, v)] for u, v in zip(path, path[1:])]
        primary = len(ws) if cost_mode == "hops" else sum(1.0 / w for w in ws)
        return (primary, -sum(ws), path)

    def walk(path):
        nonlocal best
        u = path[-1]
        if u == goal:
            k = key(tuple(path))
            if best is None or k < best:
                best = k
            return
        for v in succ[u]:
            if v not in path:
                path.append(v)
                walk(path)
                path.pop()

    walk([start])
    return None if best is None else list(best[2])


def h3o_cells(lats, lons, r):
    from h3ronpy import vector

    return [int(x) for x in vector.coordinates_to_cells(np.asarray(lats, float), np.asarray(lons, float), r).to_pylist()]


def h3o_centres(cells):
    from h3ronpy import vector

    rb = vector.cells_to_coordinates(np.asarray(cells, dtype=np.uint64))
    lat = rb.column("lat").to_pylist()
    lng = rb.column("lng").to_pylist()
    return list(zip(lat, lng))


def h3o_boundaries(cells):
    """List of (lat, lon) vertex lists, closing vertex dropped."""
    import shapely
    from h3ronpy import vector

    wkb = vector.cells_to_wkb_polygons(np.asarray(cells, dtype=np.uint64)).to_pylist()
    out = []
    for w in wkb:
        coords = list(shapely.from_wkb(w).exterior.coords)[:-1]
        out.append([(lat, lon) for lon, lat in coords])
    return out


def h3o_disk_distances(origin, k):
    """``{cell: grid distance}`` for the k-disk around ``origin``."""
    import h3ronpy

    rb = h3ronpy.grid_disk_distances(np.array([origin], dtype=np.uint64), k)
    cells = rb.column("cell").to_pylist()[0]
    ks = rb.column("k").to_pylist()[0]
    return {int(c): int(d) for c, d in zip(cells, ks)}
