"""Delay-probability scoring and the scheduling policies.

Policies share one urgency signal: a task's delay score, which decays with
the number of response rounds the task can still afford before it would set
a new maximum latency. Request-based scheduling serves one worker pull at a
time; the batch policies plan a whole round against per-worker time budgets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import BadCategoryStatsError
from .model import Assignment, Task, Worker
from .voting import WorkerSetAccuracy

DEFAULT_ROUND_INTERVAL = 30.0
DEFAULT_ICROWD_K = 3

ACCURACY_ORDER = "accuracy"
FASTEST_ORDER = "fastest"


@dataclass(frozen=True)
class DelayScore:
    """Urgency of one open task: (difficulty * quality) ^ rounds-to-record."""

    task_id: str
    score: float
    exponent: int
    difficulty: float
    quality: float
    time_lapse: float
    max_lapse: float
    mean_response: float


@dataclass
class TaskState:
    """Scheduling view of one task.

    ``active_accuracies`` are the accuracies of workers who answered plus
    those currently holding the task; ``excluded_workers`` are everyone who
    must not receive it again; ``closed`` marks a task whose in-flight set
    already satisfies the quality threshold (request policies stop handing
    it out).
    """

    task: Task
    difficulty: float
    active_accuracies: list[float] = field(default_factory=list)
    excluded_workers: set[str] = field(default_factory=set)
    closed: bool = False
    in_flight_count: int = 0


@dataclass(frozen=True)
class RequestDecision:
    """Outcome of one worker pull: the chosen task state (if any) and whether
    the in-flight set including this worker now meets the quality threshold."""

    state: Optional[TaskState]
    meets_quality: bool


@dataclass
class RoundPlan:
    """One batch round: committed pairs plus leftover per-worker budget."""

    round_interval: float
    remaining_budget: dict[str, float]
    assignment: Assignment
    round_id: Optional[int] = None


def _score_value(
    task: Task,
    difficulty: float,
    now: float,
    max_lapse: float,
    mean_response: float,
) -> tuple[float, int, float]:
    """(score, exponent, lapse) without the wrapper object; hot path."""
    if mean_response <= 0:
        raise BadCategoryStatsError(
            f"mean response for {task.category} must be positive, got {mean_response}"
        )
    if not 0.0 < difficulty <= 1.0:
        raise ValueError(f"difficulty must lie in (0, 1], got {difficulty}")
    lapse = now - task.start_time
    finish = task.finish_time
    if finish is not None:
        lapse = min(lapse, finish - task.start_time)
    exponent = math.ceil((max_lapse - lapse) / mean_response)
    if exponent < 0:
        exponent = 0
    return (difficulty * task.quality_threshold) ** exponent, exponent, lapse


def delay_score(
    task: Task,
    difficulty: float,
    now: float,
    max_lapse: float,
    mean_response: float,
) -> DelayScore:
    """Score how likely this task is to set the next maximum latency.

    The time lapse is capped by the final latency for completed tasks; the
    exponent counts mean-response-sized rounds left before the task's lapse
    reaches the current record, so the most-lapsed task scores 1.
    """
    score, exponent, lapse = _score_value(task, difficulty, now, max_lapse, mean_response)
    return DelayScore(
        task_id=task.id,
        score=score,
        exponent=exponent,
        difficulty=difficulty,
        quality=task.quality_threshold,
        time_lapse=lapse,
        max_lapse=max_lapse,
        mean_response=mean_response,
    )


def _eligible_for_worker(
    worker: Worker, states: Sequence[TaskState], now: float, ignore_closed: bool
) -> list[TaskState]:
    out = []
    for state in states:
        task = state.task
        if task.completed or task.start_time > now:
            continue
        if state.closed and not ignore_closed:
            continue
        if task.category not in worker.subscriptions:
            continue
        if worker.id in state.excluded_workers:
            continue
        out.append(state)
    return out


def _score_many(
    states: Sequence[TaskState],
    now: float,
    max_lapse: float,
    mean_response_by_category: Mapping[str, float],
) -> dict[str, float]:
    return {
        state.task.id: _score_value(
            state.task,
            state.difficulty,
            now,
            max_lapse,
            mean_response_by_category[state.task.category],
        )[0]
        for state in states
    }


def greedy_request(
    worker: Worker,
    states: Sequence[TaskState],
    now: float,
    max_lapse: float,
    mean_response_by_category: Mapping[str, float],
) -> RequestDecision:
    """Serve one worker pull with the highest-delay eligible task.

    Ties break on earlier start time, then smaller task id. The decision
    reports whether the in-flight set with this worker included satisfies
    the quality threshold (checked at odd sizes only), so the caller can
    stop handing the task out.
    """
    eligible = _eligible_for_worker(worker, states, now, ignore_closed=False)
    if not eligible:
        return RequestDecision(state=None, meets_quality=False)
    scores = _score_many(eligible, now, max_lapse, mean_response_by_category)
    chosen = min(
        eligible,
        key=lambda s: (-scores[s.task.id], s.task.start_time, s.task.id),
    )
    pool = WorkerSetAccuracy(chosen.active_accuracies)
    pool.add(worker.accuracy[chosen.task.category])
    meets = (
        pool.size % 2 == 1
        and pool.expected_accuracy() >= chosen.task.quality_threshold
    )
    return RequestDecision(state=chosen, meets_quality=meets)


def random_schedule(
    worker: Worker,
    states: Sequence[TaskState],
    now: float,
    rng: np.random.Generator,
) -> Optional[TaskState]:
    """Uniformly random eligible open task; reproducible under a seeded rng."""
    eligible = _eligible_for_worker(worker, states, now, ignore_closed=True)
    if not eligible:
        return None
    eligible.sort(key=lambda s: s.task.id)
    return eligible[int(rng.integers(len(eligible)))]


def min_worker_set_selection(
    quality_threshold: float,
    category: str,
    available: Sequence[Worker],
    already_accuracies: Sequence[float] = (),
    order: str = ACCURACY_ORDER,
) -> list[Worker]:
    """Greedily grow the assigned set until the quality threshold is met.

    Workers join in descending accuracy order (or ascending predicted
    response for the fastest-first variant); the threshold is tested at odd
    set sizes only. Returns the newly added workers, or an empty list when
    the threshold is unreachable with the given pool (or already met).
    """
    if order == ACCURACY_ORDER:
        ranked = sorted(available, key=lambda w: (-w.accuracy[category], w.id))
    elif order == FASTEST_ORDER:
        ranked = sorted(
            available, key=lambda w: (w.predicted_response[category], w.id)
        )
    else:
        raise ValueError(f"unknown selection order {order!r}")

    pool = WorkerSetAccuracy(already_accuracies)
    if pool.size % 2 == 1 and pool.expected_accuracy() >= quality_threshold:
        return []
    added: list[Worker] = []
    for worker in ranked:
        pool.add(worker.accuracy[category])
        added.append(worker)
        if pool.size % 2 == 1 and pool.expected_accuracy() >= quality_threshold:
            return added
    return []


def _round_candidates(
    state: TaskState,
    workers: Sequence[Worker],
    budget: Mapping[str, float],
) -> list[Worker]:
    # A worker stays eligible while their assigned sum has not yet exceeded
    # the round interval; the final task may overshoot it, which keeps
    # workers packed instead of idling out the remainder of every round.
    category = state.task.category
    return [
        worker
        for worker in workers
        if category in worker.subscriptions
        and worker.id not in state.excluded_workers
        and budget[worker.id] > 0.0
    ]


def _round_budgets(
    workers: Sequence[Worker],
    round_interval: float,
    carryover: Optional[Mapping[str, float]],
) -> dict[str, float]:
    if carryover is None:
        return {worker.id: round_interval for worker in workers}
    return {
        worker.id: max(0.0, round_interval - carryover.get(worker.id, 0.0))
        for worker in workers
    }


def greedy_batch(
    states: Sequence[TaskState],
    workers: Sequence[Worker],
    round_interval: float,
    now: float,
    max_lapse: float,
    mean_response_by_category: Mapping[str, float],
    order: str = ACCURACY_ORDER,
    round_id: Optional[int] = None,
    carryover: Optional[Mapping[str, float]] = None,
) -> RoundPlan:
    """Plan one batch round: most-delayed task first, minimum worker sets.

    Each worker carries a time budget of one round interval and drops out
    of the pool once their assigned predicted responses exhaust it (the
    last assignment may overshoot). ``carryover`` charges work still queued
    from earlier rounds against the new budget, so backlogs stay bounded
    while workers never idle out a round. Scores and the maximum lapse are
    frozen at round start. ``order`` switches between the accuracy-greedy
    scheduler and the fastest-worker variant.
    """
    if round_interval <= 0:
        raise ValueError(f"round interval must be positive, got {round_interval}")
    budget = _round_budgets(workers, round_interval, carryover)
    assignment = Assignment(round_id=round_id)
    open_states = [
        s for s in states if not s.task.completed and s.task.start_time <= now
    ]
    scores = _score_many(open_states, now, max_lapse, mean_response_by_category)
    queue = sorted(
        open_states,
        key=lambda s: (-scores[s.task.id], s.task.start_time, s.task.id),
    )
    for state in queue:
        if not any(b > 0 for b in budget.values()):
            break
        candidates = _round_candidates(state, workers, budget)
        if not candidates:
            continue
        selected = min_worker_set_selection(
            state.task.quality_threshold,
            state.task.category,
            candidates,
            state.active_accuracies,
            order=order,
        )
        for worker in selected:
            assignment.add(state.task.id, worker.id)
            budget[worker.id] -= worker.predicted_response[state.task.category]
    return RoundPlan(
        round_interval=round_interval,
        remaining_budget=budget,
        assignment=assignment,
        round_id=round_id,
    )


def fgreedy_schedule(
    states: Sequence[TaskState],
    workers: Sequence[Worker],
    round_interval: float,
    now: float,
    max_lapse: float,
    mean_response_by_category: Mapping[str, float],
    round_id: Optional[int] = None,
    carryover: Optional[Mapping[str, float]] = None,
) -> RoundPlan:
    """Batch round that grows worker sets fastest-first instead of by accuracy."""
    return greedy_batch(
        states,
        workers,
        round_interval,
        now,
        max_lapse,
        mean_response_by_category,
        order=FASTEST_ORDER,
        round_id=round_id,
        carryover=carryover,
    )


def icrowd_k_schedule(
    states: Sequence[TaskState],
    workers: Sequence[Worker],
    round_interval: float,
    now: float,
    max_lapse: float,
    mean_response_by_category: Mapping[str, float],
    k: int = DEFAULT_ICROWD_K,
    round_id: Optional[int] = None,
    carryover: Optional[Mapping[str, float]] = None,
) -> RoundPlan:
    """Baseline: keep exactly k workers in flight per unresolved task.

    Tasks are visited in delay order; the k-set maximises average accuracy
    (top-k by accuracy). A task that stays unresolved after its k answers
    arrive gets a fresh k-set on the next round, matching the baseline's
    resolve-it-iteratively behaviour under the quality gate.
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if round_interval <= 0:
        raise ValueError(f"round interval must be positive, got {round_interval}")
    budget = _round_budgets(workers, round_interval, carryover)
    assignment = Assignment(round_id=round_id)
    open_states = [
        s for s in states if not s.task.completed and s.task.start_time <= now
    ]
    scores = _score_many(open_states, now, max_lapse, mean_response_by_category)
    queue = sorted(
        open_states,
        key=lambda s: (-scores[s.task.id], s.task.start_time, s.task.id),
    )
    for state in queue:
        need = k - state.in_flight_count
        if need <= 0:
            continue
        candidates = _round_candidates(state, workers, budget)
        if not candidates:
            continue
        category = state.task.category
        candidates.sort(key=lambda w: (-w.accuracy[category], w.id))
        for worker in candidates[:need]:
            assignment.add(state.task.id, worker.id)
            budget[worker.id] -= worker.predicted_response[category]
    return RoundPlan(
        round_interval=round_interval,
        remaining_budget=budget,
        assignment=assignment,
        round_id=round_id,
    )
