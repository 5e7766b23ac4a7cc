import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import track
from oracles import dtw_reference, gc_distance
from vesselgap.ais_model import GeoPoint
from vesselgap.eval_harness import (
    EvalConfig,
    MethodConfig,
    dtw,
    inject_gap,
    make_gap_cases,
    resample_path,
    run_benchmark,
    split_trips,
    turn_stats,
)
from vesselgap.imputer import ImputeConfig
from vesselgap.trip_segmenter import Trip


def make_trip(i, n=200, dt_s=60, **kw):
    pts = track(f"v{i}", n, dt_s, **kw)
    return Trip(f"t{i:03d}", f"v{i}", pts)


def test_split_sizes_and_disjoint():
    trips = [make_trip(i, n=5) for i in range(10)]
    train, test = split_trips(trips, 0.7, seed=1)
    assert len(train) == 7 and len(test) == 3
    ids = [t.trip_id for t in train + test]
    assert sorted(ids) == sorted(t.trip_id for t in trips)
    again = split_trips(list(reversed(trips)), 0.7, seed=1)
    assert [t.trip_id for t in again[0]] == [t.trip_id for t in train]
    with pytest.raises(ValueError):
        split_trips(trips[:1])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([60, 120, 240]), st.integers(30, 400))
def test_inject_gap_partitions_trip(seed, minutes, n):
    trip = make_trip(0, n=n, dt_s=60)
    case = inject_gap(trip, minutes, seed)
    if trip.duration_s * 1000 <= minutes * 60_000:
        assert case is None
        return
    assert case is not None
    s, e = case.gap.start, case.gap.end
    ts = [p.ts for p in trip.points]
    i, j = ts.index(s.ts), ts.index(e.ts)
    assert [p.ts for p in case.removed] == ts[i + 1 : j]
    # removed points lie strictly inside a window of the requested length
    assert e.ts - s.ts >= minutes * 60_000 - 2 * 60_000
    if case.removed:
        assert case.removed[-1].ts - case.removed[0].ts < minutes * 60_000
    assert case.ground_truth[0] == s and case.ground_truth[-1] == e


def test_inject_gap_skips_short_trip():
    assert inject_gap(make_trip(0, n=30), 60, 0) is None
    cases, skipped = make_gap_cases([make_trip(0, n=30), make_trip(1, n=300)], [60, 240], 0)
    assert skipped == {60: 1, 240: 1}
    assert len(cases) == 2


def test_resample_spacing():
    dlat = math.degrees(1000 / 6371008.8)
    pts = [GeoPoint(10.0, 50.0, 0), GeoPoint(10.0, 50.0 + dlat, 1000)]
    out = resample_path(pts, 250)
    assert len(out) == 5 and out[0] == pts[0] and out[-1] == pts[-1]
    assert [p.ts for p in out] == [0, 250, 500, 750, 1000]
    short = [GeoPoint(10.0, 50.0), GeoPoint(10.0, 50.001)]
    assert resample_path(short, 250) == short
    assert resample_path(short[:1], 250) == short[:1]
    rng = np.random.default_rng(0)
    poly = [GeoPoint(10 + x, 50 + y) for x, y in np.cumsum(rng.normal(0, 0.01, (20, 2)), axis=0)]
    out = resample_path(poly, 250)
    assert all(gc_distance(a.lat, a.lon, b.lat, b.lon) <= 250 + 1e-6 for a, b in zip(out, out[1:]))


def test_dtw_examples():
    a = [GeoPoint(0.0, 0.0), GeoPoint(0.01, 0.0)]
    b = [GeoPoint(0.0, 0.001), GeoPoint(0.01, 0.001)]
    ref = dtw_reference([(p.lat, p.lon) for p in a], [(p.lat, p.lon) for p in b])
    assert dtw(a, b) == pytest.approx(ref, abs=0.1)
    assert dtw(a, b) == pytest.approx(gc_distance(0, 0, 0.001, 0), abs=0.1)
    assert dtw(a, a) == 0.0
    dlat = math.degrees(500 / 6371008.8)
    assert dtw([GeoPoint(5.0, 40.0)], [GeoPoint(5.0, 40.0 + dlat)]) == pytest.approx(500, abs=1e-6)
    with pytest.raises(ValueError):
        dtw([], a)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 12), st.integers(1, 12))
def test_dtw_vs_reference(seed, n, m):
    rng = np.random.default_rng(seed)
    a = [GeoPoint(float(x), float(y)) for x, y in rng.uniform(0, 0.05, (n, 2))]
    b = [GeoPoint(float(x), float(y)) for x, y in rng.uniform(0, 0.05, (m, 2))]
    ref = dtw_reference([(p.lat, p.lon) for p in a], [(p.lat, p.lon) for p in b])
    assert dtw(a, b) == pytest.approx(ref, rel=1e-9, abs=1e-6)
    assert dtw(a, b) == pytest.approx(dtw(b, a), rel=1e-12)


def test_turn_stats():
    straight = [GeoPoint(10.0, 50.0 + 0.01 * i) for i in range(5)]
    s = turn_stats(straight)
    assert (s.cnt, s.n_gt45) == (5, 0) and s.max_rot < 1e-6
    dogleg = [GeoPoint(10.0, 50.0), GeoPoint(10.0, 50.01), GeoPoint(10.015, 50.01)]
    s = turn_stats(dogleg)
    assert s.max_rot == pytest.approx(90, abs=0.5) and s.n_gt45 == 1
    uturn = [GeoPoint(10.0, 50.0), GeoPoint(10.0, 50.01), GeoPoint(10.0, 50.0)]
    assert turn_stats(uturn).max_rot == pytest.approx(180, abs=1e-6)
    two = turn_stats(straight[:2])
    assert two.cnt == 2 and two.avg_rot is None and two.max_rot is None


CFG = EvalConfig(gap_durations=(60.0,), rng_seed=5, methods=(
    MethodConfig("r9", resolution=9), MethodConfig("r8c", resolution=8, impute=ImputeConfig(projection="c")),
    MethodConfig("sli", method="sli")))


def test_benchmark_deterministic(small_corpus, tmp_path):
    r1 = run_benchmark(CFG, small_corpus)
    r2 = run_benchmark(CFG, small_corpus)
    key = lambda r: [(c.trip_id, c.config, c.dtw_m, c.cnt) for c in r.cases]
    assert key(r1) == key(r2)
    assert {s["config"] for s in r1.summary.values()} == {"r9", "r8c", "sli"}
    assert r1.n_train + r1.n_test == len(small_corpus)
    assert set(r1.storage_bytes) == {8, 9}
    paths = r1.write(tmp_path)
    data = json.loads(paths["json"].read_text())
    assert len(data["cases"]) == len(r1.cases)
    assert paths["csv"].read_text().count("\n") == len(r1.cases) + 1
    assert "r8c" in paths["text"].read_text()


def test_benchmark_parallel_matches_sequential(small_corpus):
    seq = run_benchmark(CFG, small_corpus)
    par = run_benchmark(EvalConfig(**{**CFG.__dict__, "workers": 2, "sequential_timing": False}), small_corpus)
    assert [(c.trip_id, c.config, c.dtw_m) for c in seq.cases] == [(c.trip_id, c.config, c.dtw_m) for c in par.cases]


def test_sli_on_straight_track_below_spacing():
    # meridian tracks are great circles, so only sampling offsets remain
    trips = [make_trip(i, n=300, dt_s=60, lon0=11.0 + 0.01 * i, dlon=0.0, dlat=0.002) for i in range(10)]
    cfg = EvalConfig(gap_durations=(60.0,), methods=(MethodConfig("sli", method="sli"),))
    rep = run_benchmark(cfg, trips)
    assert rep.cases and all(c.dtw_m < cfg.resample_spacing for c in rep.cases)
