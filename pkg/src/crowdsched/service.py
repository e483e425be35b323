"""HTTP service exposing the engine's batch operations.

Run standalone with ``uvicorn crowdsched.service:app`` (or ``crowdsched
serve``). The CLI talks to these endpoints, in-process by default. All
payloads carry file contents, never paths, so a remote server needs no
shared filesystem.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__
from .errors import ConfigError, CrowdschedError
from .io import (
    format_accuracies_csv,
    format_difficulties_csv,
    format_metrics_csv,
    format_notify_eval_csv,
    format_trace_csv,
    parse_events_csv,
    parse_friends_csv,
    parse_qualification_csv,
)
from .profiling import calibrate_cohort
from .schemas import (
    CalibrateRequest,
    CalibrateResponse,
    HealthResponse,
    MetricsRow,
    NotifyEvalEntry,
    NotifyEvalRequest,
    NotifyEvalResponse,
    SimulateRequest,
    SimulateResponse,
    SweepRequest,
    SweepResponse,
)
from .sim import POLICIES, SimConfig, run, run_notification_eval

SWEEP_PARAMS = ("m", "n", "L", "q-range")

app = FastAPI(
    title="crowdsched",
    description="Crowdsourcing task scheduling, worker notification, and simulation",
    version=__version__,
)


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/simulate", response_model=SimulateResponse)
def simulate(request: SimulateRequest) -> SimulateResponse:
    try:
        config = SimConfig.from_dict(request.config)
        if request.seed is not None:
            config = config.replace(seed=request.seed)
        report = run(config)
    except CrowdschedError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return SimulateResponse(
        metrics=MetricsRow(**report.metrics_row()),
        completed=report.completed,
        open_tasks=report.open_tasks,
        metrics_csv=format_metrics_csv([report.metrics_row()]),
        trace_csv=format_trace_csv(report.traces),
    )


def _sweep_overrides(param: str, value: str) -> dict:
    """Translate one sweep value into config overrides; values are strings
    so every parameter type travels the same way."""
    try:
        if param == "m":
            return {"tasks": int(value)}
        if param == "n":
            return {"workers": int(value)}
        if param == "L":
            return {"categories": int(value)}
        if param == "q-range":
            lo, hi = value.split(":")
            return {"quality_range": [float(lo), float(hi)]}
    except ValueError as exc:
        raise ConfigError("values", f"cannot parse {value!r} for {param}: {exc}") from exc
    raise ConfigError("param", f"expected one of {SWEEP_PARAMS}, got {param!r}")


@app.post("/sweep", response_model=SweepResponse)
def sweep(request: SweepRequest) -> SweepResponse:
    try:
        base = SimConfig.from_dict(request.config)
        policies = request.policies or list(POLICIES)
        for policy in policies:
            if policy not in POLICIES:
                raise ConfigError("policies", f"unknown policy {policy!r}")
        if not request.values:
            raise ConfigError("values", "no sweep values given")
        if not request.seeds:
            raise ConfigError("seeds", "no seeds given")
        rows = []
        for value in request.values:
            overrides = _sweep_overrides(request.param, value)
            for policy in policies:
                for seed in request.seeds:
                    config = base.replace(policy=policy, seed=seed, **overrides)
                    rows.append(run(config).metrics_row())
    except CrowdschedError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return SweepResponse(rows=len(rows), metrics_csv=format_metrics_csv(rows))


@app.post("/notify-eval", response_model=NotifyEvalResponse)
def notify_eval(request: NotifyEvalRequest) -> NotifyEvalResponse:
    try:
        events = parse_events_csv(request.events_csv)
        friends = parse_friends_csv(request.friends_csv)
        table = run_notification_eval(
            events,
            friends,
            fractions=request.fractions,
            methods=request.methods,
            seed=request.seed,
        )
    except CrowdschedError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    dicts = [row.as_dict() for row in table]
    return NotifyEvalResponse(
        table=[NotifyEvalEntry(**row) for row in dicts],
        csv=format_notify_eval_csv(dicts),
    )


@app.post("/calibrate", response_model=CalibrateResponse)
def calibrate(request: CalibrateRequest) -> CalibrateResponse:
    try:
        records, task_ids = parse_qualification_csv(request.qualification_csv)
        results = calibrate_cohort(records)
    except CrowdschedError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    accuracy_rows = []
    difficulty_rows = []
    for result in results:
        for worker_id in sorted(result.accuracies):
            stored = result.accuracies[worker_id]
            accuracy_rows.append(
                {
                    "worker_id": worker_id,
                    "category": result.category,
                    "accuracy": stored.value,
                    "flipped": stored.flipped,
                }
            )
        for task_id, beta in zip(task_ids[result.category], result.difficulties):
            difficulty_rows.append(
                {"category": result.category, "task_id": task_id, "difficulty": beta}
            )
    return CalibrateResponse(
        accuracies_csv=format_accuracies_csv(accuracy_rows),
        difficulties_csv=format_difficulties_csv(difficulty_rows),
    )
