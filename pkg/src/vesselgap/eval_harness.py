"""Evaluation protocol: train/test split, synthetic gaps, DTW and turn statistics."""

from __future__ import annotations

import csv
import json
import math
import statistics
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .ais_model import GeoPoint
from .geo import bearing_np, haversine, haversine_np, interpolate, turn_angle
from .h3_aggregator import aggregate_cells, aggregate_transitions
from .imputer import Gap, ImputeConfig, ImputedPath, impute_gap, impute_sli
from .traffic_graph import TrafficGraph, build_graph, graph_to_bytes
from .trip_segmenter import Trip


@dataclass(frozen=True)
class MethodConfig:
    """One method under test. ``resolution`` and ``impute`` only apply to ``habit``."""

    label: str
    method: Literal["habit", "sli"] = "habit"
    resolution: int = 9
    impute: ImputeConfig = ImputeConfig()


@dataclass(frozen=True)
class EvalConfig:
    split_ratio: float = 0.7
    gap_durations: tuple[float, ...] = (60.0, 120.0, 240.0)  # minutes
    rng_seed: int = 0
    resample_spacing: float = 250.0  # meters
    methods: tuple[MethodConfig, ...] = (
        MethodConfig("habit-r9-t250-w"),
        MethodConfig("sli", method="sli"),
    )
    workers: int = 1
    sequential_timing: bool = True

    def __post_init__(self):
        if not 0 < self.split_ratio < 1:
            raise ValueError("split_ratio must be in (0, 1)")
        if not self.gap_durations or any(d <= 0 for d in self.gap_durations):
            raise ValueError("gap_durations must be positive")
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ValueError("method labels must be unique")


@dataclass
class GapCase:
    trip_id: str
    duration_min: float
    gap: Gap
    removed: list[GeoPoint]

    @property
    def ground_truth(self) -> list[GeoPoint]:
        """Removed points bracketed by the gap endpoints."""
        return [self.gap.start, *self.removed, self.gap.end]


def split_trips(trips: Sequence[Trip], ratio: float = 0.7, seed: int = 0) -> tuple[list[Trip], list[Trip]]:
    """Seeded shuffle; the first ``ceil(ratio * n)`` trips train the graph."""
    if len(trips) < 2:
        raise ValueError("need at least two trips to split")
    ordered = sorted(trips, key=lambda t: t.trip_id)
    perm = np.random.default_rng(seed).permutation(len(ordered))
    n_train = min(len(ordered) - 1, max(1, math.ceil(ratio * len(ordered) - 1e-9)))
    train = [ordered[i] for i in perm[:n_train]]
    test = [ordered[i] for i in perm[n_train:]]
    return train, test


def inject_gap(trip: Trip, duration_min: float, seed) -> GapCase | None:
    """Remove every point strictly inside a random window of ``duration_min``.

    ``seed`` may be an int or a ``numpy.random.Generator``. Returns ``None``
    when the trip is not longer than the window.
    """
    dur_ms = duration_min * 60_000.0
    t0, t1 = trip.start_ts, trip.end_ts
    if t1 - t0 <= dur_ms:
        return None
    rng = np.random.default_rng(seed)
    w0 = float(rng.uniform(t0, t1 - dur_ms))
    w1 = w0 + dur_ms
    before = [p for p in trip.points if p.ts <= w0]
    removed = [p for p in trip.points if w0 < p.ts < w1]
    after = [p for p in trip.points if p.ts >= w1]
    if not before or not after:
        return None
    s, e = before[-1], after[0]
    gap = Gap(GeoPoint(s.lon, s.lat, s.ts), GeoPoint(e.lon, e.lat, e.ts), trip.vessel_id, trip.trip_id)
    return GapCase(trip.trip_id, duration_min, gap, [GeoPoint(p.lon, p.lat, p.ts) for p in removed])


def resample_path(points: Sequence[GeoPoint], max_spacing: float = 250.0) -> list[GeoPoint]:
    """Insert great-circle points so that consecutive spacing is at most ``max_spacing``."""
    if len(points) < 2:
        return list(points)
    out = [points[0]]
    for a, b in zip(points, points[1:]):
        d = haversine(a.lat, a.lon, b.lat, b.lon)
        n = math.ceil(d / max_spacing - 1e-9) if d > max_spacing else 1
        for i in range(1, n):
            f = i / n
            lat, lon = interpolate(a.lat, a.lon, b.lat, b.lon, f)
            ts = None if a.ts is None or b.ts is None else int(round(a.ts + (b.ts - a.ts) * f))
            out.append(GeoPoint(lon, lat, ts))
        out.append(b)
    return out


def dtw(a: Sequence[GeoPoint], b: Sequence[GeoPoint]) -> float:
    """DTW alignment cost in meters, averaged over the warping-path length.

    Among minimum-cost alignments the shortest warping path is used.
    """
    if not len(a) or not len(b):
        raise ValueError("dtw needs non-empty sequences")
    la = np.array([p.lat for p in a])
    oa = np.array([p.lon for p in a])
    lb = np.array([p.lat for p in b])
    ob = np.array([p.lon for p in b])
    dist = haversine_np(la[:, None], oa[:, None], lb[None, :], ob[None, :]).tolist()
    m = len(b)
    inf = math.inf
    prev_c = [0.0] + [inf] * m
    prev_s = [0] * (m + 1)
    for row in dist:
        cur_c = [inf] * (m + 1)
        cur_s = [0] * (m + 1)
        for j in range(1, m + 1):
            best_c, best_s = prev_c[j - 1], prev_s[j - 1]
            c, s = prev_c[j], prev_s[j]
            if c < best_c or (c == best_c and s < best_s):
                best_c, best_s = c, s
            c, s = cur_c[j - 1], cur_s[j - 1]
            if c < best_c or (c == best_c and s < best_s):
                best_c, best_s = c, s
            cur_c[j] = best_c + row[j - 1]
            cur_s[j] = best_s + 1
        prev_c, prev_s = cur_c, cur_s
    return prev_c[m] / prev_s[m]


@dataclass
class TurnStats:
    cnt: int
    avg_rot: float | None = None
    max_rot: float | None = None
    n_gt45: int | None = None


def turn_stats(points: Sequence[GeoPoint]) -> TurnStats:
    """Point count and heading changes at interior points (degrees, folded to [0, 180])."""
    n = len(points)
    if n < 3:
        return TurnStats(n)
    lat = np.array([p.lat for p in points])
    lon = np.array([p.lon for p in points])
    bearings = bearing_np(lat[:-1], lon[:-1], lat[1:], lon[1:])
    rots = [turn_angle(b0, b1) for b0, b1 in zip(bearings[:-1], bearings[1:])]
    return TurnStats(n, float(np.mean(rots)), float(np.max(rots)), int(sum(r > 45.0 for r in rots)))


@dataclass
class CaseResult:
    trip_id: str
    method: str
    config: str
    gap_minutes: float
    dtw_m: float | None
    latency_s: float | None
    fallback_used: bool
    cnt: int | None = None
    avg_rot: float | None = None
    max_rot: float | None = None
    n_gt45: int | None = None
    error: str | None = None


@dataclass
class EvalReport:
    cases: list[CaseResult] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    storage_bytes: dict = field(default_factory=dict)
    build_seconds: dict = field(default_factory=dict)
    graph_size: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)
    n_train: int = 0
    n_test: int = 0

    def to_json(self) -> dict:
        return {
            "n_train": self.n_train,
            "n_test": self.n_test,
            "storage_bytes": self.storage_bytes,
            "build_seconds": self.build_seconds,
            "graph_size": self.graph_size,
            "skipped": self.skipped,
            "summary": self.summary,
            "cases": [asdict(c) for c in self.cases],
        }

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"json": out / "report.json", "csv": out / "cases.csv", "text": out / "report.txt"}
        paths["json"].write_text(json.dumps(self.to_json(), indent=2))
        with open(paths["csv"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["trip_id", "method", "config", "gap_minutes", "dtw_m", "latency_s", "fallback_used", "error"])
            for c in self.cases:
                w.writerow([c.trip_id, c.method, c.config, c.gap_minutes,
                            "" if c.dtw_m is None else f"{c.dtw_m:.3f}",
                            "" if c.latency_s is None else f"{c.latency_s:.6f}",
                            int(c.fallback_used), c.error or ""])
        paths["text"].write_text(self.to_text())
        return paths

    def to_text(self) -> str:
        cols = ["config", "gap", "n", "fail", "fallbk", "mean_dtw", "med_dtw", "lat_avg", "lat_max",
                "cnt", "avg_rot", "max_rot", ">45"]
        rows = []
        for key, s in self.summary.items():
            rows.append([
                s["config"], f"{s['gap_minutes']:g}", str(s["n"]), str(s["failures"]), str(s["fallbacks"]),
                _fmt(s["mean_dtw"], 1), _fmt(s["median_dtw"], 1), _fmt(s["latency_avg"], 4),
                _fmt(s["latency_max"], 4), _fmt(s["cnt"], 2), _fmt(s["avg_rot"], 2), _fmt(s["max_rot"], 2),
                _fmt(s["n_gt45"], 2),
            ])
        widths = [max(len(c), *(len(r[i]) for r in rows)) if rows else len(c) for i, c in enumerate(cols)]
        lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
        lines += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in rows]
        lines.append("")
        lines.append(f"train trips: {self.n_train}  test trips: {self.n_test}")
        for r, size in sorted(self.storage_bytes.items()):
            lines.append(f"graph r={r}: {size} bytes  {self.graph_size.get(r)}  built in {self.build_seconds[r]:.2f}s")
        for d, n in sorted(self.skipped.items()):
            lines.append(f"gap {d:g} min: {n} test trips skipped (too short)")
        return "\n".join(lines) + "\n"


def _fmt(x, nd):
    return "-" if x is None else f"{x:.{nd}f}"


def build_from_trips(trips: Sequence[Trip], r: int, metadata: dict | None = None) -> TrafficGraph:
    cells = aggregate_cells(trips, r)
    transitions = aggregate_transitions(trips, r)
    meta = {"n_trips": len(trips), "n_points": sum(len(t.points) for t in trips)}
    meta.update(metadata or {})
    return build_graph(cells, transitions, resolution=r, metadata=meta)


def _mean(xs):
    return float(np.mean(xs)) if xs else None


def _summarise(cases: list[CaseResult]) -> dict:
    groups: dict[tuple[str, float], list[CaseResult]] = {}
    for c in cases:
        groups.setdefault((c.config, c.gap_minutes), []).append(c)
    summary = {}
    for (label, gap_min), cs in groups.items():
        ok = [c for c in cs if c.dtw_m is not None]
        d = [c.dtw_m for c in ok]
        lat = [c.latency_s for c in cs if c.latency_s is not None]
        summary[f"{label}@{gap_min:g}"] = {
            "config": label,
            "method": cs[0].method,
            "gap_minutes": gap_min,
            "n": len(cs),
            "failures": len(cs) - len(ok),
            "fallbacks": sum(c.fallback_used for c in cs),
            "mean_dtw": _mean(d),
            "median_dtw": float(statistics.median(d)) if d else None,
            "latency_avg": _mean(lat),
            "latency_max": max(lat) if lat else None,
            "cnt": _mean([c.cnt for c in ok if c.cnt is not None]),
            "avg_rot": _mean([c.avg_rot for c in ok if c.avg_rot is not None]),
            "max_rot": _mean([c.max_rot for c in ok if c.max_rot is not None]),
            "n_gt45": _mean([c.n_gt45 for c in ok if c.n_gt45 is not None]),
        }
    return summary


def evaluate_case(case: GapCase, mcfg: MethodConfig, graph: TrafficGraph | None, spacing: float) -> CaseResult:
    """Impute one gap with one method and score it against the removed points."""
    t0 = time.perf_counter()
    try:
        if mcfg.method == "sli":
            path: ImputedPath = impute_sli(case.gap, spacing)
        else:
            path = impute_gap(graph, case.gap, mcfg.impute)
    except Exception as exc:  # recorded, never fatal
        return CaseResult(case.trip_id, mcfg.method, mcfg.label, case.duration_min, None,
                          time.perf_counter() - t0, False, error=f"{type(exc).__name__}: {exc}")
    latency = time.perf_counter() - t0
    score = dtw(resample_path(path.points, spacing), resample_path(case.ground_truth, spacing))
    ts = turn_stats(path.points)
    return CaseResult(case.trip_id, mcfg.method, mcfg.label, case.duration_min, score, latency,
                      path.fallback_used, ts.cnt, ts.avg_rot, ts.max_rot, ts.n_gt45)


_WORKER_STATE: dict = {}


def _init_worker(graphs, spacing):
    _WORKER_STATE["graphs"] = graphs
    _WORKER_STATE["spacing"] = spacing


def _run_chunk(jobs):
    graphs, spacing = _WORKER_STATE["graphs"], _WORKER_STATE["spacing"]
    return [evaluate_case(case, m, graphs.get(m.resolution) if m.method == "habit" else None, spacing)
            for case, m in jobs]


def make_gap_cases(test: Sequence[Trip], durations: Sequence[float], seed: int) -> tuple[list[GapCase], dict]:
    rng = np.random.default_rng([seed, 1])
    cases, skipped = [], {}
    for d in durations:
        for trip in test:
            case = inject_gap(trip, d, rng)
            if case is None:
                skipped[d] = skipped.get(d, 0) + 1
            else:
                cases.append(case)
        skipped.setdefault(d, 0)
    return cases, skipped


def run_benchmark(cfg: EvalConfig, trips: Sequence[Trip]) -> EvalReport:
    """Split, build one graph per resolution, inject gaps, impute and score."""
    train, test = split_trips(trips, cfg.split_ratio, cfg.rng_seed)
    report = EvalReport(n_train=len(train), n_test=len(test))
    graphs: dict[int, TrafficGraph] = {}
    for r in sorted({m.resolution for m in cfg.methods if m.method == "habit"}):
        t0 = time.perf_counter()
        g = build_from_trips(train, r)
        report.build_seconds[r] = time.perf_counter() - t0
        report.storage_bytes[r] = len(graph_to_bytes(g))
        report.graph_size[r] = g.summary()
        graphs[r] = g
    cases, report.skipped = make_gap_cases(test, cfg.gap_durations, cfg.rng_seed)
    jobs = [(case, m) for m in cfg.methods for case in cases]
    if cfg.workers > 1 and not cfg.sequential_timing and jobs:
        from concurrent.futures import ProcessPoolExecutor

        n_chunks = cfg.workers * 4
        chunks = [jobs[i::n_chunks] for i in range(n_chunks)]
        with ProcessPoolExecutor(cfg.workers, initializer=_init_worker,
                                 initargs=(graphs, cfg.resample_spacing)) as pool:
            parts = list(pool.map(_run_chunk, chunks))
        # restore the sequential order
        results: list[CaseResult | None] = [None] * len(jobs)
        for k, part in enumerate(parts):
            for idx, res in zip(range(k, len(jobs), n_chunks), part):
                results[idx] = res
        report.cases = results  # type: ignore[assignment]
    else:
        report.cases = [
            evaluate_case(case, m, graphs.get(m.resolution) if m.method == "habit" else None, cfg.resample_spacing)
            for case, m in jobs
        ]
    report.summary = _summarise(report.cases)
    return report
