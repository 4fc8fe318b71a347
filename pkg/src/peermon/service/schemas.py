"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class ScenarioDetail(BaseModel):
    name: str
    seed: int
    duration: int
    spike_segments: List[Tuple[float, float]]
    values: Optional[List[float]] = None


class RuleCheckRequest(BaseModel):
    text: str


class RuleSummary(BaseModel):
    name: str
    salience: int
    conditions: List[str]
    actions: List[str]


class RuleCheckResponse(BaseModel):
    rules: List[RuleSummary]
    canonical: str


class StateParams(BaseModel):
    k: int = 5
    p: float = 0.8
    delta_max: float = 0.05
    too_low: float = 0.1
    low: float = 0.3
    high: float = 0.7
    too_high: float = 0.9


class ClassifyRequest(BaseModel):
    kind: Literal["numerical", "categorical"] = "numerical"
    window: List[Union[float, str]]
    config: StateParams = Field(default_factory=StateParams)


class ClassifyResponse(BaseModel):
    states: List[str]


class ExperimentRequest(BaseModel):
    scenario: str
    mode: Literal["adaptive", "static"] = "adaptive"
    seed: int = 0
    preset: str = "rq1"
    rules_text: Optional[str] = None
    # omitted: use the preset's sensitivity; null: disable suppression
    sensitivity: Optional[float] = None
    include_traces: bool = False


class ExperimentMetrics(BaseModel):
    scenario: str
    mode: str
    seed: int
    rmse_follower: float
    rmse_leader: float
    msgs_per_sec: float
    spike_pct: Optional[float]
    report_count: int
    duration: int
    final_interval: float


class ExperimentResponse(ExperimentMetrics):
    csv: str
    trace_csv: Optional[str] = None
    samples: Optional[List[Tuple[float, float]]] = None
    reports: Optional[List[Tuple[float, float]]] = None
    intervals: Optional[List[Tuple[float, float]]] = None


class MatrixRequest(BaseModel):
    seeds: int = 1
    preset: str = "rq1"
    scenarios: Optional[List[str]] = None
    modes: Optional[List[Literal["adaptive", "static"]]] = None
    sensitivity: Optional[float] = None


class MatrixResponse(BaseModel):
    results: List[ExperimentMetrics]
    csv: str
