"""Declarative run configuration (YAML or JSON) with CLI overrides."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .eval_harness import EvalConfig, MethodConfig
from .imputer import ImputeConfig
from .trip_segmenter import SegmenterConfig


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class InputSection(_Strict):
    paths: list[Path] = Field(default_factory=list)
    delimiter: str = ","
    columns: dict[str, Optional[str]] = Field(default_factory=dict)
    ts_format: Optional[str] = None
    ts_unit: Literal["auto", "s", "ms"] = "auto"
    tz: str = "UTC"

    @field_validator("columns")
    @classmethod
    def _known_fields(cls, v):
        unknown = set(v) - {"vessel_id", "ts", "lon", "lat", "sog", "cog"}
        if unknown:
            raise ValueError(f"unknown record fields {sorted(unknown)}")
        return v


class SegmenterSection(_Strict):
    stop_speed_knots: float = Field(0.5, gt=0)
    min_stop_duration: float = Field(900.0, gt=0)
    gap_threshold: float = Field(1800.0, gt=0)
    max_plausible_speed: float = Field(50.0, gt=0)

    def build(self) -> SegmenterConfig:
        return SegmenterConfig(**self.model_dump())


class ImputeSection(_Strict):
    projection: Literal["c", "w"] = "w"
    tolerance: float = Field(250.0, ge=0)
    cost_mode: Literal["hops", "inverse_frequency"] = "hops"
    k_max: int = Field(16, ge=0)
    fallback: Literal["error", "straight_line"] = "straight_line"
    fallback_spacing: float = Field(250.0, gt=0)

    @field_validator("cost_mode", mode="before")
    @classmethod
    def _dash(cls, v):
        return v.replace("-", "_") if isinstance(v, str) else v

    def build(self) -> ImputeConfig:
        return ImputeConfig(**self.model_dump())


class MethodSection(_Strict):
    label: str
    method: Literal["habit", "sli"] = "habit"
    resolution: Optional[int] = Field(None, ge=0, le=15)
    projection: Optional[Literal["c", "w"]] = None
    tolerance: Optional[float] = Field(None, ge=0)
    cost_mode: Optional[Literal["hops", "inverse_frequency"]] = None


class EvalSection(_Strict):
    split_ratio: float = Field(0.7, gt=0, lt=1)
    gap_durations: list[float] = Field(default_factory=lambda: [60.0, 120.0, 240.0])
    resample_spacing: float = Field(250.0, gt=0)
    methods: list[MethodSection] = Field(default_factory=list)
    sequential_timing: bool = True

    @field_validator("gap_durations")
    @classmethod
    def _positive(cls, v):
        if not v or any(d <= 0 for d in v):
            raise ValueError("gap durations must be positive")
        return v


class RunConfig(_Strict):
    input: InputSection = Field(default_factory=InputSection)
    segmenter: SegmenterSection = Field(default_factory=SegmenterSection)
    resolution: int = Field(9, ge=0, le=15)
    impute: ImputeSection = Field(default_factory=ImputeSection)
    eval: EvalSection = Field(default_factory=EvalSection)
    seed: int = 0
    workers: Optional[int] = Field(None, ge=1)
    out: Path = Path("out")
    trips: Optional[Path] = None
    graph: Optional[Path] = None

    @model_validator(mode="after")
    def _labels_unique(self):
        labels = [m.label for m in self.eval.methods]
        if len(set(labels)) != len(labels):
            raise ValueError("eval.methods labels must be unique")
        return self

    @property
    def trips_path(self) -> Path:
        return self.trips or self.out / "trips.csv"

    @property
    def graph_path(self) -> Path:
        return self.graph or self.out / f"graph_r{self.resolution}.vgtg"

    @property
    def n_workers(self) -> int:
        return self.workers or os.cpu_count() or 1

    def eval_config(self) -> EvalConfig:
        base = self.impute.build()
        methods = []
        for m in self.eval.methods or [MethodSection(label="habit"), MethodSection(label="sli", method="sli")]:
            overrides = {k: getattr(m, k) for k in ("projection", "tolerance", "cost_mode") if getattr(m, k) is not None}
            impute = ImputeConfig(**{**base.__dict__, **overrides})
            methods.append(MethodConfig(m.label, m.method, m.resolution if m.resolution is not None else self.resolution, impute))
        return EvalConfig(
            split_ratio=self.eval.split_ratio,
            gap_durations=tuple(self.eval.gap_durations),
            rng_seed=self.seed,
            resample_spacing=self.eval.resample_spacing,
            methods=tuple(methods),
            workers=self.n_workers,
            sequential_timing=self.eval.sequential_timing,
        )


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Read a YAML/JSON document and apply dotted-key overrides (``impute.tolerance``)."""
    data: dict = {}
    if path is not None:
        text = Path(path).read_text()
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ValueError(f"{path}: top level must be a mapping")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        node = data
        *parents, leaf = key.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    return RunConfig.model_validate(data)
