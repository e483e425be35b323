"""Deterministic discrete-event simulator.

Synthesises a worker/task population from archetype statistics, drives one
scheduling policy over an event loop (worker pulls for the request-based
policies, fixed-interval rounds for the batch ones), samples answers, and
reports latency/accuracy/throughput. One run is single-threaded and fully
determined by (config, seed).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigError, UnusableWorkerError
from .io import ArchetypeRow, load_default_archetypes, parse_archetypes_csv
from .model import SKIP, Answer, Category, Task, Worker, clamp_accuracy
from .notification import (
    WEEK_SECONDS,
    adaptive_kde_scale,
    circular_offset,
    em_fit,
    split_validation,
)
from .profiling import (
    BASE_DIFFICULTY,
    predict_response_time,
    recent_point_count,
    task_difficulty,
)
from .scheduling import (
    DEFAULT_ICROWD_K,
    DEFAULT_ROUND_INTERVAL,
    TaskState,
    greedy_batch,
    greedy_request,
    icrowd_k_schedule,
    random_schedule,
)
from .voting import MAJORITY, WorkerSetAccuracy, aggregate

RBS = "RBS"
BBS = "BBS"
RANDOM = "RANDOM"
FGREEDY = "fGreedy"
ICROWD = "iCrowd"
POLICIES = (RBS, BBS, RANDOM, FGREEDY, ICROWD)

_POLICY_ALIASES = {policy.lower(): policy for policy in POLICIES}

ARRIVAL_BATCH = "batch"
ARRIVAL_POISSON = "poisson"

# Minimum sampled per-category response time.
MIN_RESPONSE_SECONDS = 0.5

# Observations needed before a category's running mean replaces the seed mean.
CATEGORY_MEAN_WARMUP = 5

_EVENT_ARRIVAL = 0
_EVENT_ANSWER = 1
_EVENT_REQUEST = 2
_EVENT_ROUND = 3


@dataclass(frozen=True)
class SimConfig:
    """Experiment parameterisation; defaults follow the evaluated setup."""

    seed: int = 0
    tasks: int = 3000
    workers: int = 300
    categories: int = 20
    quality_range: tuple[float, float] = (0.8, 0.85)
    policy: str = "BBS"
    icrowd_k: int = DEFAULT_ICROWD_K
    round_interval: float = DEFAULT_ROUND_INTERVAL
    skip_probability: float = 0.0
    choice_count: int = 2
    horizon: float = 86400.0
    arrival_model: str = ARRIVAL_BATCH
    arrival_rate_per_hour: Optional[float] = None
    archetypes_csv: Optional[str] = None

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConfig":
        """Validate a config document; unknown keys are rejected by name."""
        if not isinstance(raw, dict):
            raise ConfigError("config", "expected a JSON object")
        known = {
            "seed",
            "tasks",
            "workers",
            "categories",
            "quality_range",
            "policy",
            "icrowd_k",
            "round_interval",
            "skip_probability",
            "choice_count",
            "horizon",
            "arrival",
            "archetypes_csv",
        }
        for key in raw:
            if key not in known:
                raise ConfigError(key, "unknown configuration key")

        def _int(key, default, minimum):
            value = raw.get(key, default)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(key, f"expected an integer, got {value!r}")
            if value < minimum:
                raise ConfigError(key, f"must be at least {minimum}, got {value}")
            return value

        def _number(key, default, minimum=None, strict=False):
            value = raw.get(key, default)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(key, f"expected a number, got {value!r}")
            value = float(value)
            if minimum is not None and (value <= minimum if strict else value < minimum):
                op = "above" if strict else "at least"
                raise ConfigError(key, f"must be {op} {minimum}, got {value}")
            return value

        seed = _int("seed", 0, 0)
        tasks = _int("tasks", 3000, 0)
        workers = _int("workers", 300, 0)
        categories = _int("categories", 20, 1)
        icrowd_k = _int("icrowd_k", DEFAULT_ICROWD_K, 1)
        choice_count = _int("choice_count", 2, 2)
        round_interval = _number("round_interval", DEFAULT_ROUND_INTERVAL, 0.0, strict=True)
        horizon = _number("horizon", 86400.0, 0.0, strict=True)
        skip_probability = _number("skip_probability", 0.0, 0.0)
        if skip_probability >= 1.0:
            raise ConfigError("skip_probability", f"must be below 1, got {skip_probability}")

        q_range = raw.get("quality_range", [0.8, 0.85])
        if (
            not isinstance(q_range, (list, tuple))
            or len(q_range) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in q_range)
        ):
            raise ConfigError("quality_range", f"expected [low, high], got {q_range!r}")
        q_lo, q_hi = float(q_range[0]), float(q_range[1])
        if not 0.5 < q_lo <= q_hi < 1.0:
            raise ConfigError(
                "quality_range", f"need 0.5 < low <= high < 1, got [{q_lo}, {q_hi}]"
            )

        policy_raw = raw.get("policy", "BBS")
        if not isinstance(policy_raw, str) or policy_raw.lower() not in _POLICY_ALIASES:
            raise ConfigError("policy", f"expected one of {POLICIES}, got {policy_raw!r}")
        policy = _POLICY_ALIASES[policy_raw.lower()]

        arrival = raw.get("arrival", {"model": ARRIVAL_BATCH})
        if isinstance(arrival, str):
            arrival = {"model": arrival}
        if not isinstance(arrival, dict) or "model" not in arrival:
            raise ConfigError("arrival", f"expected {{'model': ...}}, got {arrival!r}")
        arrival_model = arrival["model"]
        rate = None
        if arrival_model == ARRIVAL_POISSON:
            if "rate_per_hour" not in arrival:
                raise ConfigError("arrival.rate_per_hour", "required for poisson arrivals")
            rate = arrival["rate_per_hour"]
            if isinstance(rate, bool) or not isinstance(rate, (int, float)) or rate <= 0:
                raise ConfigError("arrival.rate_per_hour", f"must be positive, got {rate!r}")
            rate = float(rate)
            extras = set(arrival) - {"model", "rate_per_hour"}
        elif arrival_model == ARRIVAL_BATCH:
            extras = set(arrival) - {"model"}
        else:
            raise ConfigError("arrival.model", f"expected batch or poisson, got {arrival_model!r}")
        if extras:
            raise ConfigError(f"arrival.{sorted(extras)[0]}", "unknown configuration key")

        archetypes_csv = raw.get("archetypes_csv")
        if archetypes_csv is not None and not isinstance(archetypes_csv, str):
            raise ConfigError("archetypes_csv", "expected CSV text")

        return cls(
            seed=seed,
            tasks=tasks,
            workers=workers,
            categories=categories,
            quality_range=(q_lo, q_hi),
            policy=policy,
            icrowd_k=icrowd_k,
            round_interval=round_interval,
            skip_probability=skip_probability,
            choice_count=choice_count,
            horizon=horizon,
            arrival_model=arrival_model,
            arrival_rate_per_hour=rate,
            archetypes_csv=archetypes_csv,
        )

    def to_dict(self) -> dict:
        arrival: dict = {"model": self.arrival_model}
        if self.arrival_rate_per_hour is not None:
            arrival["rate_per_hour"] = self.arrival_rate_per_hour
        out = {
            "seed": self.seed,
            "tasks": self.tasks,
            "workers": self.workers,
            "categories": self.categories,
            "quality_range": list(self.quality_range),
            "policy": self.policy,
            "icrowd_k": self.icrowd_k,
            "round_interval": self.round_interval,
            "skip_probability": self.skip_probability,
            "choice_count": self.choice_count,
            "horizon": self.horizon,
            "arrival": arrival,
        }
        if self.archetypes_csv is not None:
            out["archetypes_csv"] = self.archetypes_csv
        return out

    def replace(self, **changes) -> "SimConfig":
        merged = self.to_dict()
        merged.update(changes)
        return SimConfig.from_dict(merged)


@dataclass
class SimWorker:
    """A generated worker: profile plus the true per-category response model."""

    worker: Worker
    true_response: dict[str, float]
    response_variance: dict[str, float]
    archetype_id: str


@dataclass
class Population:
    categories: list[Category]
    workers: list[SimWorker]
    tasks: list[Task]
    category_means: dict[str, float]


def generate_population(
    config: SimConfig,
    archetypes: Optional[Sequence[ArchetypeRow]] = None,
    rng: Optional[np.random.Generator] = None,
) -> Population:
    """Sample workers from archetype statistics and tasks from the config.

    Each worker copies a uniformly chosen archetype's accuracies and draws
    per-category response means from the archetype's Gaussian (truncated at
    0.5 s). Sim categories cycle through the archetype's categories when L
    differs. Workers subscribe to every category.
    """
    if archetypes is None:
        if config.archetypes_csv is not None:
            archetypes = parse_archetypes_csv(config.archetypes_csv)
        else:
            archetypes = load_default_archetypes()
    if rng is None:
        rng = np.random.default_rng(config.seed)

    by_archetype: dict[str, dict[str, ArchetypeRow]] = {}
    archetype_categories: list[str] = []
    for row in archetypes:
        by_archetype.setdefault(row.worker_id, {})[row.category] = row
        if row.category not in archetype_categories:
            archetype_categories.append(row.category)
    archetype_ids = list(by_archetype)
    for archetype_id, per_category in by_archetype.items():
        missing = [c for c in archetype_categories if c not in per_category]
        if missing:
            raise ConfigError(
                "archetypes", f"archetype {archetype_id} lacks categories {missing}"
            )

    category_objects = [Category(id=f"c{l:02d}", index=l) for l in range(config.categories)]
    categories = [c.id for c in category_objects]
    drawn: list[tuple[str, dict[str, float], dict[str, float], dict[str, float]]] = []
    category_totals = {c: 0.0 for c in categories}
    for j in range(config.workers):
        archetype_id = archetype_ids[int(rng.integers(len(archetype_ids)))]
        per_category = by_archetype[archetype_id]
        accuracy: dict[str, float] = {}
        true_response: dict[str, float] = {}
        response_variance: dict[str, float] = {}
        for l, category in enumerate(categories):
            row = per_category[archetype_categories[l % len(archetype_categories)]]
            mean = max(
                MIN_RESPONSE_SECONDS,
                float(rng.normal(row.mean_response, math.sqrt(row.response_variance))),
            )
            try:
                accuracy[category] = clamp_accuracy(row.accuracy, config.choice_count).value
            except UnusableWorkerError as exc:
                raise ConfigError("archetypes", str(exc)) from exc
            true_response[category] = mean
            response_variance[category] = row.response_variance
            category_totals[category] += mean
        drawn.append((archetype_id, accuracy, true_response, response_variance))

    category_means = {
        c: (category_totals[c] / len(drawn)) if drawn else 15.0 for c in categories
    }

    # Accuracies are known to the platform from qualification; speed is not,
    # so cold-start response predictions fall back to the category mean and
    # are refined from observed history as the run progresses.
    workers = []
    for j, (archetype_id, accuracy, true_response, response_variance) in enumerate(drawn):
        worker = Worker(
            id=f"w{j:04d}",
            subscriptions=set(categories),
            accuracy=accuracy,
            predicted_response=dict(category_means),
        )
        workers.append(
            SimWorker(
                worker=worker,
                true_response=true_response,
                response_variance=response_variance,
                archetype_id=archetype_id,
            )
        )

    tasks: list[Task] = []
    arrival_clock = 0.0
    for i in range(config.tasks):
        category = categories[int(rng.integers(config.categories))]
        quality = float(rng.uniform(*config.quality_range))
        ground_truth = int(rng.integers(config.choice_count))
        if config.arrival_model == ARRIVAL_POISSON:
            arrival_clock += float(
                rng.exponential(3600.0 / config.arrival_rate_per_hour)
            )
            start = arrival_clock
        else:
            start = 0.0
        tasks.append(
            Task(
                id=f"t{i:05d}",
                category=category,
                quality_threshold=quality,
                start_time=start,
                choice_count=config.choice_count,
                ground_truth=ground_truth,
            )
        )
    return Population(
        categories=category_objects,
        workers=workers,
        tasks=tasks,
        category_means=category_means,
    )


@dataclass
class TaskRuntime(TaskState):
    """TaskState plus the simulator's bookkeeping."""

    answered_pool: WorkerSetAccuracy = field(default_factory=WorkerSetAccuracy)
    completion_probability: Optional[float] = None
    correct: Optional[bool] = None


@dataclass
class MetricsReport:
    """Latency/accuracy/throughput of one run plus per-task records."""

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
    completed: int
    open_tasks: int
    issued: int
    answered: int
    skipped: int
    traces: list[dict] = field(default_factory=list)
    completion_probabilities: dict[str, float] = field(default_factory=dict)

    @property
    def in_flight_end(self) -> int:
        return self.issued - self.answered - self.skipped

    def metrics_row(self) -> dict:
        return {
            "seed": self.seed,
            "policy": self.policy,
            "m": self.m,
            "n": self.n,
            "L": self.L,
            "qlo": self.qlo,
            "qhi": self.qhi,
            "max_latency": self.max_latency,
            "avg_accuracy": self.avg_accuracy,
            "throughput": self.throughput,
        }


class _Engine:
    """Single-run event loop shared by all policies."""

    def __init__(self, config: SimConfig, population: Population, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.workers = population.workers
        self.states = [
            TaskRuntime(task=task, difficulty=BASE_DIFFICULTY) for task in population.tasks
        ]
        self.by_id = {state.task.id: state for state in self.states}
        self.open_count = 0
        self.arrived_count = 0
        self.heap: list[tuple] = []
        self.seq = 0
        self.max_completed_latency = 0.0
        # open tasks in arrival order for the lazy earliest-open-start scan
        self.open_order: list[TaskRuntime] = []
        self.open_front = 0
        self.category_seed_means = population.category_means
        self.category_observed: dict[str, tuple[int, float]] = {
            c: (0, 0.0) for c in population.category_means
        }
        self.issued = 0
        self.answered = 0
        self.skipped = 0
        self.idle: set[int] = set()
        self.busy_until = [0.0] * len(self.workers)
        self.accuracy_of = {
            sim.worker.id: sim.worker.accuracy for sim in self.workers
        }

    # -- event plumbing -----------------------------------------------------

    def push(self, time: float, kind: int, payload: tuple) -> None:
        heapq.heappush(self.heap, (time, kind, self.seq, payload))
        self.seq += 1

    # -- shared state helpers -----------------------------------------------

    def mean_response(self, category: str) -> float:
        count, total = self.category_observed[category]
        if count >= CATEGORY_MEAN_WARMUP:
            return total / count
        return self.category_seed_means[category]

    def mean_response_map(self) -> dict[str, float]:
        return {c: self.mean_response(c) for c in self.category_seed_means}

    def eps_max(self, now: float) -> float:
        while self.open_front < len(self.open_order) and (
            self.open_order[self.open_front].task.completed
        ):
            self.open_front += 1
        lapse = self.max_completed_latency
        if self.open_front < len(self.open_order):
            lapse = max(lapse, now - self.open_order[self.open_front].task.start_time)
        return lapse

    def open_task(self, index: int) -> None:
        self.arrived_count += 1
        self.open_count += 1
        self.open_order.append(self.states[index])

    def assign(self, worker_index: int, state: TaskRuntime, now: float) -> tuple[int, float]:
        """Sample the worker's answer at assignment time; returns (choice, response)."""
        sim = self.workers[worker_index]
        category = state.task.category
        response = max(
            MIN_RESPONSE_SECONDS,
            float(
                self.rng.normal(
                    sim.true_response[category],
                    math.sqrt(sim.response_variance[category]),
                )
            ),
        )
        if self.config.skip_probability > 0 and (
            float(self.rng.random()) < self.config.skip_probability
        ):
            choice = SKIP
        else:
            accuracy = sim.worker.accuracy[category]
            if float(self.rng.random()) < accuracy:
                choice = state.task.ground_truth
            else:
                wrong = int(self.rng.integers(self.config.choice_count - 1))
                choice = wrong if wrong < state.task.ground_truth else wrong + 1
        state.excluded_workers.add(sim.worker.id)
        state.active_accuracies.append(sim.worker.accuracy[category])
        state.in_flight_count += 1
        self.issued += 1
        return choice, response

    def process_answer(
        self, worker_index: int, state: TaskRuntime, choice: int, response: float, now: float
    ) -> None:
        sim = self.workers[worker_index]
        task = state.task
        category = task.category
        accuracy = sim.worker.accuracy[category]
        task.record_answer(
            Answer(
                worker_id=sim.worker.id,
                task_id=task.id,
                choice=choice,
                submit_time=now,
                latency=response,
            )
        )
        state.in_flight_count -= 1
        if choice == SKIP:
            self.skipped += 1
            state.active_accuracies.remove(accuracy)
            if state.closed and not task.completed:
                # the in-flight set no longer covers the threshold
                state.closed = False
                self.wake_idle(now)
        else:
            self.answered += 1
            count, total = self.category_observed[category]
            self.category_observed[category] = (count + 1, total + response)
            sim.worker.record_response(category, now, response)
            history = sim.worker.response_history[category]
            sim.worker.predicted_response[category] = predict_response_time(
                history, recent_point_count(history, now), at=now
            )
            if not task.completed:
                state.answered_pool.add(accuracy)
                if state.answered_pool.size % 2 == 1:
                    probability = state.answered_pool.expected_accuracy()
                    if probability >= task.quality_threshold:
                        self.complete(state, now, probability)
        if not task.completed:
            accuracies = {
                a.worker_id: self.accuracy_of[a.worker_id][category]
                for a in task.answers
            }
            state.difficulty = task_difficulty(task, accuracies).difficulty

    def complete(self, state: TaskRuntime, now: float, probability: float) -> None:
        task = state.task
        task.complete(now)
        state.completion_probability = probability
        winner, _ = aggregate(task.answers, scheme=MAJORITY)
        state.correct = winner == task.ground_truth
        self.open_count -= 1
        self.max_completed_latency = max(self.max_completed_latency, task.latency)
        if len(self.open_order) > 64 and self.open_count * 2 < len(self.open_order):
            self.open_order = [s for s in self.open_order if not s.task.completed]
            self.open_front = 0

    def wake_idle(self, now: float) -> None:
        for worker_index in sorted(self.idle):
            self.push(now, _EVENT_REQUEST, (worker_index,))
        self.idle.clear()

    # -- request-based loop (RBS, RANDOM) ------------------------------------

    def run_request_based(self) -> None:
        config = self.config
        for index, state in enumerate(self.states):
            if config.arrival_model == ARRIVAL_BATCH or state.task.start_time == 0.0:
                self.open_task(index)
            else:
                self.push(state.task.start_time, _EVENT_ARRIVAL, (index,))
        for worker_index in range(len(self.workers)):
            self.push(0.0, _EVENT_REQUEST, (worker_index,))

        while self.heap and self.open_count + (
            len(self.states) - self.arrived_count
        ) > 0:
            time, kind, _, payload = heapq.heappop(self.heap)
            if time > config.horizon:
                break
            if kind == _EVENT_ARRIVAL:
                self.open_task(payload[0])
                self.wake_idle(time)
            elif kind == _EVENT_REQUEST:
                self.handle_request(payload[0], time)
            elif kind == _EVENT_ANSWER:
                worker_index, task_id, choice, response = payload
                self.process_answer(
                    worker_index, self.by_id[task_id], choice, response, time
                )
                self.push(time, _EVENT_REQUEST, (worker_index,))

    def handle_request(self, worker_index: int, now: float) -> None:
        sim = self.workers[worker_index]
        open_states = [s for s in self.open_order if not s.task.completed]
        if self.config.policy == RANDOM:
            chosen = random_schedule(sim.worker, open_states, now, self.rng)
            meets_quality = False
        else:
            decision = greedy_request(
                sim.worker,
                open_states,
                now,
                self.eps_max(now),
                self.mean_response_map(),
            )
            chosen = decision.state
            meets_quality = decision.meets_quality
        if chosen is None:
            self.idle.add(worker_index)
            return
        choice, response = self.assign(worker_index, chosen, now)
        if self.config.policy == RBS and meets_quality and choice != SKIP:
            chosen.closed = True
        self.push(now + response, _EVENT_ANSWER, (worker_index, chosen.task.id, choice, response))

    # -- batch loop (BBS, fGreedy, iCrowd) ------------------------------------

    def run_batch(self) -> None:
        config = self.config
        for index, state in enumerate(self.states):
            if config.arrival_model == ARRIVAL_BATCH or state.task.start_time == 0.0:
                self.open_task(index)
            else:
                self.push(state.task.start_time, _EVENT_ARRIVAL, (index,))
        self.push(0.0, _EVENT_ROUND, (0,))

        while self.heap:
            time, kind, _, payload = heapq.heappop(self.heap)
            if time > config.horizon:
                break
            if kind == _EVENT_ARRIVAL:
                self.open_task(payload[0])
            elif kind == _EVENT_ANSWER:
                worker_index, task_id, choice, response = payload
                self.process_answer(
                    worker_index, self.by_id[task_id], choice, response, time
                )
            elif kind == _EVENT_ROUND:
                if self.open_count == 0 and self.arrived_count == len(self.states):
                    break
                committed = self.run_round(payload[0], time)
                answers_pending = any(entry[1] == _EVENT_ANSWER for entry in self.heap)
                arrivals_pending = any(entry[1] == _EVENT_ARRIVAL for entry in self.heap)
                if committed == 0 and not answers_pending and not arrivals_pending:
                    break
                next_time = (payload[0] + 1) * config.round_interval
                if next_time <= config.horizon:
                    self.push(next_time, _EVENT_ROUND, (payload[0] + 1,))

    def run_round(self, round_id: int, now: float) -> int:
        config = self.config
        # every worker participates; tasks queue behind their current backlog,
        # and the backlog is charged against this round's budget
        carryover = {
            sim.worker.id: max(0.0, self.busy_until[j] - now)
            for j, sim in enumerate(self.workers)
        }
        pool = [sim.worker for sim in self.workers]
        open_states = [s for s in self.open_order if not s.task.completed]
        if not pool or not open_states:
            return 0
        means = self.mean_response_map()
        lapse = self.eps_max(now)
        if config.policy == ICROWD:
            plan = icrowd_k_schedule(
                open_states, pool, config.round_interval, now, lapse, means,
                k=config.icrowd_k, round_id=round_id, carryover=carryover,
            )
        else:
            order = "fastest" if config.policy == FGREEDY else "accuracy"
            plan = greedy_batch(
                open_states, pool, config.round_interval, now, lapse, means,
                order=order, round_id=round_id, carryover=carryover,
            )
        index_of = {sim.worker.id: j for j, sim in enumerate(self.workers)}
        for task_id, worker_id in plan.assignment.pairs:
            worker_index = index_of[worker_id]
            state = self.by_id[task_id]
            choice, response = self.assign(worker_index, state, now)
            submit = max(now, self.busy_until[worker_index]) + response
            self.busy_until[worker_index] = submit
            self.push(submit, _EVENT_ANSWER, (worker_index, task_id, choice, response))
        return len(plan.assignment.pairs)

    # -- reporting ------------------------------------------------------------

    def report(self) -> MetricsReport:
        config = self.config
        latencies = []
        correct_flags = []
        traces = []
        completion_probabilities = {}
        completed = 0
        open_tasks = 0
        last_finish = 0.0
        for state in self.states:
            task = state.task
            if task.completed:
                completed += 1
                latencies.append(task.latency)
                correct_flags.append(bool(state.correct))
                last_finish = max(last_finish, task.finish_time)
                completion_probabilities[task.id] = state.completion_probability
            elif task.start_time <= config.horizon:
                open_tasks += 1
                latencies.append(config.horizon - task.start_time)
            traces.append(
                {
                    "task_id": task.id,
                    "category": task.category,
                    "quality": task.quality_threshold,
                    "start_time": task.start_time,
                    "finish_time": task.finish_time,
                    "latency": task.latency,
                    "answers": len(task.answers) - task.skip_count,
                    "skips": task.skip_count,
                    "correct": state.correct,
                    # audit trail, not part of the CSV schema: accuracies of
                    # the answers counted at completion time
                    "completion_accuracies": list(state.answered_pool.accuracies),
                }
            )
        max_latency = max(latencies) if latencies else 0.0
        avg_accuracy = (
            sum(correct_flags) / len(correct_flags) if correct_flags else 0.0
        )
        if completed == 0:
            throughput = 0.0
        else:
            makespan = config.horizon if open_tasks else last_finish
            throughput = completed / (makespan / 3600.0) if makespan > 0 else 0.0
        return MetricsReport(
            seed=config.seed,
            policy=config.policy,
            m=config.tasks,
            n=config.workers,
            L=config.categories,
            qlo=config.quality_range[0],
            qhi=config.quality_range[1],
            max_latency=max_latency,
            avg_accuracy=avg_accuracy,
            throughput=throughput,
            completed=completed,
            open_tasks=open_tasks,
            issued=self.issued,
            answered=self.answered,
            skipped=self.skipped,
            traces=traces,
            completion_probabilities=completion_probabilities,
        )


def run(
    config: SimConfig, archetypes: Optional[Sequence[ArchetypeRow]] = None
) -> MetricsReport:
    """Run one simulation to completion (or the horizon) and report metrics."""
    rng = np.random.default_rng(config.seed)
    population = generate_population(config, archetypes, rng)
    engine = _Engine(config, population, rng)
    if config.policy in (RBS, RANDOM):
        engine.run_request_based()
    else:
        engine.run_batch()
    return engine.report()


# -- notification-module evaluation -------------------------------------------

NOTIFY_METHODS = ("SKDE", "KDE", "NWP", "Random")

NWP_WINDOW_SECONDS = 900.0
PREDICTION_WINDOW_SECONDS = 900.0


@dataclass(frozen=True)
class NotifyEvalRow:
    method: str
    fraction: float
    predictions: int
    correct: int
    actual: int

    @property
    def precision(self) -> float:
        return self.correct / self.predictions if self.predictions else 0.0

    @property
    def recall(self) -> float:
        return self.correct / self.actual if self.actual else 0.0

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "fraction": self.fraction,
            "predictions": self.predictions,
            "correct": self.correct,
            "actual": self.actual,
            "precision": self.precision,
            "recall": self.recall,
        }


def run_notification_eval(
    events: Mapping[str, Sequence[float]],
    friends: Mapping[str, set[str]],
    fractions: Sequence[float],
    methods: Sequence[str] = NOTIFY_METHODS,
    seed: int = 0,
    window: float = PREDICTION_WINDOW_SECONDS,
    split_fraction: float = 0.8,
    max_eval_timestamps: int = 20,
) -> list[NotifyEvalRow]:
    """Score availability predictors on held-out activity.

    Events are split by time; models see the early part and are asked, at
    activity timestamps sampled from the tail, to name the workers most
    likely to act within the next window. A prediction is correct when the
    named worker has an activity inside [ts, ts+window]; precision divides
    by predictions made, recall by workers actually active.
    """
    for method in methods:
        if method not in NOTIFY_METHODS:
            raise ConfigError("methods", f"unknown method {method!r}")
    for fraction in fractions:
        if not 0.0 < fraction <= 1.0:
            raise ConfigError("fraction", f"must lie in (0, 1], got {fraction}")
    worker_ids = sorted(
        set(events) | set(friends) | {peer for circle in friends.values() for peer in circle}
    )
    all_times = sorted(t for series in events.values() for t in series)
    if not all_times:
        raise ConfigError("events", "event log is empty")
    t_split = all_times[0] + split_fraction * (all_times[-1] - all_times[0])
    training = {w: [t for t in events.get(w, ()) if t < t_split] for w in worker_ids}
    future = {w: [t for t in events.get(w, ()) if t >= t_split] for w in worker_ids}
    candidates = sorted({t for series in future.values() for t in series})
    if not candidates:
        raise ConfigError("events", "no held-out activity after the training split")

    rng = np.random.default_rng(seed)
    chosen = min(max_eval_timestamps, len(candidates))
    eval_ts = sorted(
        candidates[i]
        for i in rng.choice(len(candidates), size=chosen, replace=False)
    )

    wrapped_eval = np.asarray([ts % WEEK_SECONDS for ts in eval_ts])
    # per worker: (self-only densities, mixture densities) across eval points;
    # the population scale is shared, so it is evaluated exactly once
    densities: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    if any(m in ("SKDE", "KDE") for m in methods):
        global_training = sorted(t for w in worker_ids for t in training[w])
        global_scale = adaptive_kde_scale(global_training)
        global_density = global_scale.density(wrapped_eval)
        for w in worker_ids:
            own_training, validation = split_validation(training[w])
            self_scale = adaptive_kde_scale(own_training)
            friend_events = sorted(
                [t for peer in friends.get(w, ()) for t in training.get(peer, ())]
                + own_training
            )
            friend_scale = adaptive_kde_scale(friend_events)
            weights, _ = em_fit([self_scale, friend_scale, global_scale], validation)
            self_density = self_scale.density(wrapped_eval)
            mixture = (
                weights[0] * self_density
                + weights[1] * friend_scale.density(wrapped_eval)
                + weights[2] * global_density
            )
            densities[w] = (self_density, mixture)

    rankings: dict[str, list[list[str]]] = {}
    for method in methods:
        per_ts: list[list[str]] = []
        if method == "Random":
            for _ in eval_ts:
                order = [worker_ids[i] for i in rng.permutation(len(worker_ids))]
                per_ts.append(order)
        elif method == "NWP":
            for ts in wrapped_eval:
                counts = {}
                for w in worker_ids:
                    stamps = np.asarray(training[w], dtype=float) % WEEK_SECONDS
                    if stamps.size:
                        offsets = np.abs(circular_offset(stamps, ts))
                        counts[w] = int((offsets <= NWP_WINDOW_SECONDS).sum())
                    else:
                        counts[w] = 0
                per_ts.append(sorted(worker_ids, key=lambda w: (-counts[w], w)))
        else:
            source = 0 if method == "KDE" else 1
            for i in range(len(eval_ts)):
                scores = {w: float(densities[w][source][i]) for w in worker_ids}
                per_ts.append(sorted(worker_ids, key=lambda w: (-scores[w], w)))
        rankings[method] = per_ts

    active_at: list[set[str]] = []
    for ts in eval_ts:
        active_at.append(
            {
                w
                for w in worker_ids
                if any(ts <= t <= ts + window for t in events.get(w, ()))
            }
        )

    rows = []
    for method in methods:
        for fraction in fractions:
            take = max(1, math.ceil(fraction * len(worker_ids)))
            predictions = correct = actual = 0
            for ranked, active in zip(rankings[method], active_at):
                picked = ranked[:take]
                predictions += len(picked)
                correct += sum(1 for w in picked if w in active)
                actual += len(active)
            rows.append(
                NotifyEvalRow(
                    method=method,
                    fraction=fraction,
                    predictions=predictions,
                    correct=correct,
                    actual=actual,
                )
            )
    rows.sort(key=lambda r: (r.method, r.fraction))
    return rows
