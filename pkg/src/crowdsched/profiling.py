"""Worker and task profile estimation.

Covers qualification-test grading (with difficulty-weighted refinement),
live accuracy updates, least-squares response-time prediction, and the
skip/entropy task-difficulty score the scheduler ranks on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .errors import (
    DegenerateWeightsError,
    EmptyCohortError,
    EmptyTestError,
    NoAssigneesError,
    NoHistoryError,
)
from .model import ClampedAccuracy, Task, clamp_accuracy

# Floor difficulty assigned to every task.
BASE_DIFFICULTY = 0.01

# Recency window for live updates and response prediction (15 simulated
# minutes), with floor/cap on the number of points actually used.
RECENT_WINDOW_SECONDS = 900.0
MIN_RECENT_POINTS = 3
MAX_RECENT_POINTS = 50

MIN_PREDICTED_RESPONSE = 1e-3

CALIBRATION_TOLERANCE = 1e-6
CALIBRATION_MAX_ITERATIONS = 100


@dataclass
class QualificationRecord:
    """One worker's answers on a category's qualification test."""

    worker_id: str
    category: str
    answers: list[int]
    ground_truth: list[int]
    difficulties: Optional[list[float]] = None

    def __post_init__(self) -> None:
        if len(self.answers) != len(self.ground_truth):
            raise ValueError("answers and ground truth must have equal length")
        if self.difficulties is not None:
            if len(self.difficulties) != len(self.answers):
                raise ValueError("one difficulty per testing task is required")
            for beta in self.difficulties:
                if not 0.0 <= beta <= 1.0:
                    raise ValueError(f"difficulty must lie in [0, 1], got {beta}")

    @property
    def correct_flags(self) -> list[bool]:
        return [a == g for a, g in zip(self.answers, self.ground_truth)]


@dataclass
class DifficultyEstimate:
    """Task difficulty with its entropy term and the counts behind it."""

    task_id: str
    difficulty: float
    entropy: float
    skipped: int
    answered: int

    @property
    def responded(self) -> int:
        return self.skipped + self.answered


def initial_accuracy(record: QualificationRecord) -> ClampedAccuracy:
    """Fraction of correctly answered testing tasks, clamped above 0.5."""
    if not record.answers:
        raise EmptyTestError(f"empty qualification test for {record.worker_id}")
    raw = sum(record.correct_flags) / len(record.answers)
    return clamp_accuracy(raw)


def testing_task_difficulty(
    worker_accuracies: Sequence[float], wrong_flags: Sequence[bool]
) -> float:
    """Accuracy-weighted fraction of the cohort that got this testing task wrong."""
    if not worker_accuracies:
        raise EmptyCohortError("no graded workers for this testing task")
    if len(worker_accuracies) != len(wrong_flags):
        raise ValueError("one wrong flag per worker is required")
    total = math.fsum(worker_accuracies)
    if total <= 0:
        raise ValueError("worker accuracies must be positive")
    wrong = math.fsum(a for a, w in zip(worker_accuracies, wrong_flags) if w)
    return wrong / total


def weighted_accuracy(record: QualificationRecord) -> ClampedAccuracy:
    """Difficulty-weighted qualification accuracy, clamped above 0.5."""
    if not record.answers:
        raise EmptyTestError(f"empty qualification test for {record.worker_id}")
    if record.difficulties is None:
        raise ValueError("record carries no testing-task difficulties")
    total = math.fsum(record.difficulties)
    if total <= 0:
        raise DegenerateWeightsError(
            f"all testing-task difficulties are zero for {record.worker_id}"
        )
    raw = (
        math.fsum(
            beta
            for beta, correct in zip(record.difficulties, record.correct_flags)
            if correct
        )
        / total
    )
    return clamp_accuracy(raw)


@dataclass
class CohortCalibration:
    """Fixed point of the accuracy/difficulty alternation for one category."""

    category: str
    accuracies: dict[str, ClampedAccuracy]
    difficulties: list[float]
    iterations: int


def calibrate_cohort(records: Sequence[QualificationRecord]) -> list[CohortCalibration]:
    """Alternate worker-accuracy and task-difficulty estimation to a fixed point.

    Starts from unit difficulties, then repeats: grade workers with the
    current weights, re-score testing-task difficulties from the graded
    cohort. Stops when the largest per-iteration change drops below 1e-6
    or after 100 rounds.
    """
    if not records:
        raise EmptyTestError("no qualification records")
    by_category: dict[str, list[QualificationRecord]] = {}
    for record in records:
        by_category.setdefault(record.category, []).append(record)

    results = []
    for category in sorted(by_category):
        cohort = by_category[category]
        test_size = len(cohort[0].answers)
        if test_size == 0:
            raise EmptyTestError(f"empty qualification test in category {category}")
        for record in cohort:
            if len(record.answers) != test_size:
                raise ValueError(
                    f"all records in category {category} must share one test"
                )

        betas = [1.0] * test_size
        accuracies = {r.worker_id: initial_accuracy(r) for r in cohort}
        iterations = 0
        for iterations in range(1, CALIBRATION_MAX_ITERATIONS + 1):
            new_betas = []
            for i in range(test_size):
                new_betas.append(
                    testing_task_difficulty(
                        [accuracies[r.worker_id].value for r in cohort],
                        [not r.correct_flags[i] for r in cohort],
                    )
                )
            new_accuracies = {}
            for record in cohort:
                weighted = QualificationRecord(
                    worker_id=record.worker_id,
                    category=record.category,
                    answers=record.answers,
                    ground_truth=record.ground_truth,
                    difficulties=new_betas,
                )
                try:
                    new_accuracies[record.worker_id] = weighted_accuracy(weighted)
                except DegenerateWeightsError:
                    new_accuracies[record.worker_id] = initial_accuracy(record)
            change = max(
                [abs(a - b) for a, b in zip(new_betas, betas)]
                + [
                    abs(new_accuracies[w].value - accuracies[w].value)
                    for w in accuracies
                ]
            )
            betas, accuracies = new_betas, new_accuracies
            if change < CALIBRATION_TOLERANCE:
                break
        results.append(
            CohortCalibration(
                category=category,
                accuracies=accuracies,
                difficulties=betas,
                iterations=iterations,
            )
        )
    return results


def update_accuracy(
    current: float,
    cohort_size: int,
    recent: Sequence[tuple[int, int]],
) -> ClampedAccuracy:
    """Blend the standing accuracy with the rate over recent aggregated results.

    ``recent`` holds (answer, aggregated result) pairs; the blend weight
    leans on the qualification cohort size, so a large cohort damps noisy
    live swings. With nothing recent the standing value is kept.
    """
    k = len(recent)
    if k == 0:
        return clamp_accuracy(current)
    if cohort_size < 0:
        raise ValueError("cohort size must be non-negative")
    theta = cohort_size / (cohort_size + k)
    recent_rate = sum(1 for answer, result in recent if answer == result) / k
    return clamp_accuracy(theta * current + (1.0 - theta) * recent_rate)


def recent_point_count(
    history: Sequence[tuple[float, float]],
    now: float,
    window: float = RECENT_WINDOW_SECONDS,
) -> int:
    """How many trailing points the response predictor should use at ``now``."""
    if not history:
        return 0
    in_window = sum(1 for t, _ in history if t >= now - window)
    return max(MIN_RECENT_POINTS, min(MAX_RECENT_POINTS, in_window))


def predict_response_time(
    history: Sequence[tuple[float, float]],
    recent_count: int,
    at: float,
) -> float:
    """Least-squares line through the most recent points, evaluated at ``at``.

    One point returns that point's value; coincident timestamps fall back to
    the mean. The prediction is floored at 1 ms so downstream budget math
    never divides by zero.
    """
    if not history:
        raise NoHistoryError("no response history")
    points = list(history[-max(1, recent_count):])
    if len(points) == 1:
        return max(MIN_PREDICTED_RESPONSE, points[0][1])
    times = [t for t, _ in points]
    values = [v for _, v in points]
    n = len(points)
    mean_t = math.fsum(times) / n
    mean_v = math.fsum(values) / n
    var_t = math.fsum((t - mean_t) ** 2 for t in times)
    if var_t == 0.0:
        return max(MIN_PREDICTED_RESPONSE, mean_v)
    slope = math.fsum((t - mean_t) * (v - mean_v) for t, v in points) / var_t
    return max(MIN_PREDICTED_RESPONSE, mean_v + slope * (at - mean_t))


def answer_entropy(
    task: Task, accuracies: Mapping[str, float]
) -> float:
    """Accuracy-weighted entropy of the recorded (non-skip) answer choices.

    Choice masses are normalised over the workers who answered; an unanswered
    task has entropy zero by convention.
    """
    mass: dict[int, float] = {}
    for answer in task.answers:
        if answer.is_skip:
            continue
        mass[answer.choice] = mass.get(answer.choice, 0.0) + accuracies[answer.worker_id]
    total = math.fsum(mass.values())
    if total <= 0.0:
        return 0.0
    entropy = 0.0
    for weight in mass.values():
        p = weight / total
        entropy -= p * math.log(p)
    return entropy


def task_difficulty(
    task: Task, accuracies: Mapping[str, float]
) -> DifficultyEstimate:
    """Skip fraction plus normalised answer entropy plus the base constant.

    Computed over the workers who responded (answered or skipped); raises
    when nobody has, since there is no evidence to score yet.
    """
    skipped = task.skip_count
    answered = len(task.answers) - skipped
    responded = skipped + answered
    if responded == 0:
        raise NoAssigneesError(f"task {task.id} has no responses yet")
    entropy = answer_entropy(task, accuracies)
    max_entropy = math.log(task.choice_count)
    raw = (
        skipped / responded
        + (answered / responded) * (entropy / max_entropy)
        + BASE_DIFFICULTY
    )
    return DifficultyEstimate(
        task_id=task.id,
        difficulty=min(1.0, raw),
        entropy=entropy,
        skipped=skipped,
        answered=answered,
    )
