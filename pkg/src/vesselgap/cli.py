"""Command line entry point: ``vesselgap {ingest,build,impute,eval,export-geojson,synth}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from collections import Counter
from pathlib import Path

from pydantic import ValidationError

from .ais_model import GeoPoint, ParseError, RejectReason, parse_timestamp, read_records
from .eval_harness import build_from_trips, run_benchmark
from .imputer import Gap, OffNetworkError, UnreachableError, impute_gap
from .traffic_graph import GraphFormatError, graph_to_geojson, load_graph, save_graph
from .trip_segmenter import read_trips, segment_corpus, write_trips

log = logging.getLogger("vesselgap")

EXIT_CONFIG = 2
EXIT_IO = 1


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_IO):
        super().__init__(message)
        self.code = code


def _config(args):
    from .config import load_config

    overrides = {
        "seed": args.seed,
        "resolution": args.resolution,
        "impute.tolerance": args.tolerance,
        "impute.projection": args.projection,
        "impute.cost_mode": args.cost_mode,
        "workers": args.workers,
        "out": args.out,
    }
    for key, attr in (("trips", "trips"), ("graph", "graph")):
        if getattr(args, attr, None):
            overrides[key] = getattr(args, attr)
    if getattr(args, "inputs", None):
        overrides["input.paths"] = args.inputs
    if args.config is not None and not Path(args.config).is_file():
        raise CliError(f"config file not found: {args.config}", EXIT_CONFIG)
    try:
        return load_config(args.config, overrides)
    except ValidationError as exc:
        msgs = "; ".join(f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in exc.errors())
        raise CliError(f"invalid configuration: {msgs}", EXIT_CONFIG) from None
    except (ValueError, OSError) as exc:
        raise CliError(f"invalid configuration: {exc}", EXIT_CONFIG) from None


def _require(path: Path, what: str) -> None:
    if not path.is_file():
        raise CliError(f"{what} not found: {path}")


def cmd_ingest(args) -> int:
    cfg = _config(args)
    if not cfg.input.paths:
        raise CliError("no input paths (set input.paths or pass files)", EXIT_CONFIG)
    for p in cfg.input.paths:
        _require(p, "input file")
    try:
        read = read_records(cfg.input.paths, cfg.input.columns, cfg.input.delimiter,
                            ts_format=cfg.input.ts_format, ts_unit=cfg.input.ts_unit, tz=cfg.input.tz)
    except ParseError as exc:
        raise CliError(f"schema error: {exc}", EXIT_CONFIG) from None
    result = segment_corpus(read.records, cfg.segmenter.build(), cfg.resolution, workers=cfg.n_workers)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_trips(result.trips, cfg.trips_path)
    counts = Counter({r.value: 0 for r in RejectReason})
    counts.update({r.value: n for r, n in read.rejected.items()})
    counts.update({r.value: n for r, n in result.rejected.items()})
    report = {
        "rows_read": len(read.records) + sum(read.rejected.values()),
        "records_accepted": len(read.records) - sum(result.rejected.values()),
        "rejected": dict(sorted(counts.items())),
        "trips": len(result.trips),
        "micro_trips_removed": result.n_micro_trips,
        "trip_points": sum(len(t.points) for t in result.trips),
    }
    report_path = cfg.out / "rejections.json"
    report_path.write_text(json.dumps(report, indent=2))
    print(f"wrote {report['trips']} trips to {cfg.trips_path}; rejection report {report_path}")
    return 0


def cmd_build(args) -> int:
    cfg = _config(args)
    _require(cfg.trips_path, "trips file")
    trips = read_trips(cfg.trips_path)
    if not trips:
        log.warning("empty graph: no trips in %s", cfg.trips_path)
    t0 = time.perf_counter()
    g = build_from_trips(trips, cfg.resolution, {"source": str(cfg.trips_path)})
    elapsed = time.perf_counter() - t0
    cfg.graph_path.parent.mkdir(parents=True, exist_ok=True)
    size = save_graph(g, cfg.graph_path)
    print(f"graph r={g.resolution}: {len(g.nodes)} nodes, {len(g.edges)} edges, "
          f"{size} bytes ({size / 1e6:.2f} MB) -> {cfg.graph_path} [{elapsed:.2f}s]")
    return 0


def _load_graph(path: Path):
    _require(path, "graph file")
    try:
        return load_graph(path)
    except GraphFormatError as exc:
        raise CliError(f"cannot load graph {path}: {exc}") from None


GAP_COLUMNS = ["vessel_id", "start_lon", "start_lat", "start_ts", "end_lon", "end_lat", "end_ts"]


def read_gaps(path: Path) -> list[tuple[int, Gap | str]]:
    """Rows of a gaps file; unparseable rows come back as an error string."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(GAP_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise CliError(f"gaps file lacks columns {sorted(missing)}", EXIT_CONFIG)
        for i, row in enumerate(reader):
            try:
                gap = Gap(
                    GeoPoint(float(row["start_lon"]), float(row["start_lat"]), parse_timestamp(row["start_ts"])),
                    GeoPoint(float(row["end_lon"]), float(row["end_lat"]), parse_timestamp(row["end_ts"])),
                    row["vessel_id"],
                    row.get("trip_id") or "",
                )
                out.append((i, gap))
            except (ValueError, ParseError) as exc:
                out.append((i, f"bad gap row: {exc}"))
    return out


def cmd_impute(args) -> int:
    cfg = _config(args)
    g = _load_graph(cfg.graph_path)
    gaps_path = Path(args.gaps)
    _require(gaps_path, "gaps file")
    icfg = cfg.impute.build()
    features = []
    for i, item in read_gaps(gaps_path):
        if isinstance(item, str):
            features.append({"type": "Feature", "geometry": None, "properties": {"row": i, "error": item}})
            continue
        props = {"row": i, "vessel_id": item.vessel_id}
        try:
            path = impute_gap(g, item, icfg)
        except (OffNetworkError, UnreachableError) as exc:
            props["error"] = f"{type(exc).__name__}: {exc}"
            features.append({"type": "Feature", "geometry": None, "properties": props})
            continue
        features.append(path.to_feature(props))
    collection = {"type": "FeatureCollection", "features": features}
    out = Path(args.output) if args.output else cfg.out / "imputed.geojson"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(collection))
    print(f"wrote {len(features)} features to {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    _require(cfg.trips_path, "trips file")
    trips = read_trips(cfg.trips_path)
    if len(trips) < 2:
        raise CliError(f"need at least two trips for evaluation, found {len(trips)}", EXIT_CONFIG)
    report = run_benchmark(cfg.eval_config(), trips)
    paths = report.write(cfg.out)
    print(report.to_text())
    print("reports: " + ", ".join(str(p) for p in paths.values()))
    return 0


def cmd_export_geojson(args) -> int:
    cfg = _config(args)
    g = _load_graph(cfg.graph_path)
    out = Path(args.output) if args.output else cfg.out / "cells.geojson"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(graph_to_geojson(g)))
    print(f"wrote {len(g.nodes)} cell polygons to {out}")
    return 0


def cmd_synth(args) -> int:
    from .ais_model import serialize_record
    from .synthetic import corridor_records

    recs = corridor_records(args.trips_count, seed=args.seed or 0)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write("vessel_id,ts,lon,lat,sog,cog\n")
        for r in recs:
            fh.write(serialize_record(r) + "\n")
    print(f"wrote {len(recs)} synthetic records to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="YAML or JSON run configuration")
    shared.add_argument("--seed", type=int)
    shared.add_argument("--resolution", type=int, help="H3 resolution (0-15)")
    shared.add_argument("--tolerance", type=float, help="simplification tolerance in meters")
    shared.add_argument("--projection", choices=["c", "w"], help="c = cell centre, w = data median")
    shared.add_argument("--cost-mode", choices=["hops", "inverse-frequency"])
    shared.add_argument("--workers", type=int)
    shared.add_argument("--out", help="output directory")
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="vesselgap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[shared], help="parse, clean and segment raw AIS files into trips")
    p.add_argument("inputs", nargs="*", help="input files (override input.paths)")
    p.add_argument("--trips", help="trips output file")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build", parents=[shared], help="aggregate trips into a traffic graph")
    p.add_argument("--trips", help="trips file")
    p.add_argument("--graph", help="graph output file")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("impute", parents=[shared], help="impute gaps listed in a CSV file")
    p.add_argument("--graph", help="graph file")
    p.add_argument("--gaps", required=True, help="CSV with " + ",".join(GAP_COLUMNS))
    p.add_argument("-o", "--output", help="GeoJSON output file")
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("eval", parents=[shared], help="run the synthetic-gap benchmark")
    p.add_argument("--trips", help="trips file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-geojson", parents=[shared], help="graph nodes as cell polygons")
    p.add_argument("--graph", help="graph file")
    p.add_argument("-o", "--output", help="GeoJSON output file")
    p.set_defaults(func=cmd_export_geojson)

    p = sub.add_parser("synth", parents=[shared], help="write a synthetic corridor AIS corpus")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--trips-count", type=int, default=200)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
