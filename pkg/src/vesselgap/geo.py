"""Spherical geodesy helpers (haversine, bearings, great-circle interpolation).

All distances are in meters on a sphere of mean Earth radius. Angles in and
out are degrees; ordering of arguments is always ``(lat, lon)`` to match
the H3 bindings.
"""

from __future__ import annotations

import math

import numpy as np

EARTH_RADIUS_M = 6371008.8
METERS_PER_NM = 1852.0


def haversine(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def haversine_np(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Vectorised :func:`haversine`; inputs broadcast."""
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    dp = p2 - p1
    dl = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dp / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(a)))


def speed_knots(lat1: float, lon1: float, lat2: float, lon2: float, dt_s: float) -> float:
    if dt_s <= 0:
        return math.inf
    return haversine(lat1, lon1, lat2, lon2) / dt_s * 3600.0 / METERS_PER_NM


def initial_bearing(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Initial great-circle bearing from point 1 to point 2, in [0, 360)."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dl = math.radians(lon2 - lon1)
    y = math.sin(dl) * math.cos(p2)
    x = math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dl)
    return math.degrees(math.atan2(y, x)) % 360.0


def bearing_np(lat1, lon1, lat2, lon2) -> np.ndarray:
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    dl = np.radians(np.asarray(lon2) - np.asarray(lon1))
    y = np.sin(dl) * np.cos(p2)
    x = np.cos(p1) * np.sin(p2) - np.sin(p1) * np.cos(p2) * np.cos(dl)
    return np.degrees(np.arctan2(y, x)) % 360.0


def turn_angle(b_in: float, b_out: float) -> float:
    """Absolute heading change folded to [0, 180]."""
    d = abs(b_out - b_in) % 360.0
    return 360.0 - d if d > 180.0 else d


def interpolate(lat1: float, lon1: float, lat2: float, lon2: float, f: float) -> tuple[float, float]:
    """Point at fraction ``f`` along the great circle from 1 to 2."""
    if f <= 0.0:
        return lat1, lon1
    if f >= 1.0:
        return lat2, lon2
    d = haversine(lat1, lon1, lat2, lon2) / EARTH_RADIUS_M
    if d < 1e-12:
        return lat1, lon1
    p1, l1 = math.radians(lat1), math.radians(lon1)
    p2, l2 = math.radians(lat2), math.radians(lon2)
    a = math.sin((1 - f) * d) / math.sin(d)
    b = math.sin(f * d) / math.sin(d)
    x = a * math.cos(p1) * math.cos(l1) + b * math.cos(p2) * math.cos(l2)
    y = a * math.cos(p1) * math.sin(l1) + b * math.cos(p2) * math.sin(l2)
    z = a * math.sin(p1) + b * math.sin(p2)
    return math.degrees(math.atan2(z, math.hypot(x, y))), math.degrees(math.atan2(y, x))


def segment_distance_np(lat, lon, lat_a: float, lon_a: float, lat_b: float, lon_b: float) -> np.ndarray:
    """Distance in meters from points to the great-circle arc a-b.

    Uses the cross-track distance when the along-track projection falls
    inside the arc and the distance to the nearer endpoint otherwise.
    """
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    d_ab = haversine(lat_a, lon_a, lat_b, lon_b)
    d_ap = haversine_np(lat_a, lon_a, lat, lon)
    if d_ab < 1e-9:
        return d_ap
    d_bp = haversine_np(lat_b, lon_b, lat, lon)
    th_ab = math.radians(initial_bearing(lat_a, lon_a, lat_b, lon_b))
    th_ap = np.radians(bearing_np(lat_a, lon_a, lat, lon))
    delta = d_ap / EARTH_RADIUS_M
    dth = th_ap - th_ab
    xt = np.arcsin(np.clip(np.sin(delta) * np.sin(dth), -1.0, 1.0))
    # tan(along) = tan(delta) cos(dth); atan2 keeps tiny offsets and the sign
    at = np.arctan2(np.sin(delta) * np.cos(dth), np.cos(delta)) * EARTH_RADIUS_M
    out = np.abs(xt) * EARTH_RADIUS_M
    out = np.where(at < 0, d_ap, out)
    out = np.where(at > d_ab, d_bp, out)
    return out


def segment_distance(lat: float, lon: float, lat_a: float, lon_a: float, lat_b: float, lon_b: float) -> float:
    """Scalar :func:`segment_distance_np` (cheaper for a handful of points)."""
    d_ap = haversine(lat_a, lon_a, lat, lon)
    d_ab = haversine(lat_a, lon_a, lat_b, lon_b)
    if d_ab < 1e-9:
        return d_ap
    dth = math.radians(initial_bearing(lat_a, lon_a, lat, lon) - initial_bearing(lat_a, lon_a, lat_b, lon_b))
    delta = d_ap / EARTH_RADIUS_M
    xt = math.asin(max(-1.0, min(1.0, math.sin(delta) * math.sin(dth))))
    at = math.atan2(math.sin(delta) * math.cos(dth), math.cos(delta)) * EARTH_RADIUS_M
    if at < 0:
        return d_ap
    if at > d_ab:
        return haversine(lat_b, lon_b, lat, lon)
    return abs(xt) * EARTH_RADIUS_M


def path_length(lats, lons) -> float:
    if len(lats) < 2:
        return 0.0
    return float(np.sum(haversine_np(lats[:-1], lons[:-1], lats[1:], lons[1:])))
