"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from .sim import NOTIFY_METHODS


class MetricsRow(BaseModel):
    seed: int
    policy: str
    m: int
    n: int
    L: int
    qlo: float
    qhi: float
    max_latency: float
    avg_accuracy: float
    throughput: float


class SimulateRequest(BaseModel):
    config: dict = Field(default_factory=dict)
    seed: Optional[int] = None


class SimulateResponse(BaseModel):
    metrics: MetricsRow
    completed: int
    open_tasks: int
    metrics_csv: str
    trace_csv: str


class SweepRequest(BaseModel):
    config: dict = Field(default_factory=dict)
    param: str
    values: list[str]
    seeds: list[int] = Field(default_factory=lambda: [0, 1, 2])
    policies: Optional[list[str]] = None


class SweepResponse(BaseModel):
    rows: int
    metrics_csv: str


class NotifyEvalRequest(BaseModel):
    events_csv: str
    friends_csv: str = "worker_id_a,worker_id_b\n"
    fractions: list[float] = Field(default_factory=lambda: [0.05, 0.1])
    methods: list[str] = Field(default_factory=lambda: list(NOTIFY_METHODS))
    seed: int = 0


class NotifyEvalEntry(BaseModel):
    method: str
    fraction: float
    predictions: int
    correct: int
    actual: int
    precision: float
    recall: float


class NotifyEvalResponse(BaseModel):
    table: list[NotifyEvalEntry]
    csv: str


class CalibrateRequest(BaseModel):
    qualification_csv: str


class CalibrateResponse(BaseModel):
    accuracies_csv: str
    difficulties_csv: str


class HealthResponse(BaseModel):
    status: str
    version: str
