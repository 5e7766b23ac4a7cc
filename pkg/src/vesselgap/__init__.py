"""Vessel trajectory gap imputation over an H3 cell-transition graph."""

from .ais_model import AisRecord, GeoPoint, RejectReason, Schema, parse_record, validate_record
from .eval_harness import EvalConfig, MethodConfig, dtw, inject_gap, resample_path, run_benchmark, split_trips, turn_stats
from .h3_aggregator import CellStats, TransitionStats, aggregate_cells, aggregate_transitions, assign_cell
from .imputer import Gap, ImputeConfig, ImputedPath, find_cell_path, impute_gap, impute_sli, project_path, simplify_rdp
from .traffic_graph import TrafficGraph, build_graph, grid_distance, load_graph, nearest_node, save_graph
from .trip_segmenter import SegmenterConfig, Trip, clean_stream, detect_stops, filter_micro_trips, segment_trips

__version__ = "0.1.0"
