"""Domain types shared by the scheduler, notifier, and simulator.

Time is simulation-relative seconds held in 64-bit floats; wall-clock time
never enters the core, so runs replay deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .errors import UnusableWorkerError

# Distinguished answer value for a worker who declined the task. Kept in the
# answer log (not dropped) so the skip count is always recoverable from it.
SKIP = -1

# Nudge applied to an exactly-at-chance accuracy so the worker stays usable.
ACCURACY_EPSILON = 1e-6


class ClampedAccuracy(NamedTuple):
    """Stored accuracy above 0.5 plus whether the answer-flip convention applies."""

    value: float
    flipped: bool


def clamp_accuracy(raw: float, choice_count: int = 2) -> ClampedAccuracy:
    """Map a raw accuracy in [0, 1] to the stored (0.5, 1] range.

    Binary tasks use the flip convention: a worker who is reliably wrong is
    treated as answering the opposite, so accuracies below 0.5 store their
    complement with ``flipped`` set. Exactly 0.5 is nudged up by a tiny
    epsilon instead of rejected. For more than two choices there is no
    opposite answer to take, so raw accuracy at or below chance is an error.
    """
    if not 0.0 <= raw <= 1.0:
        raise ValueError(f"accuracy must be within [0, 1], got {raw}")
    if choice_count == 2:
        if raw > 0.5:
            return ClampedAccuracy(raw, False)
        if raw < 0.5:
            # complementing a float just under 0.5 can round back to 0.5
            return ClampedAccuracy(max(1.0 - raw, 0.5 + ACCURACY_EPSILON), True)
        return ClampedAccuracy(0.5 + ACCURACY_EPSILON, False)
    if choice_count < 2:
        raise ValueError(f"choice_count must be at least 2, got {choice_count}")
    if raw <= 1.0 / choice_count:
        raise UnusableWorkerError(
            f"accuracy {raw} at or below chance for {choice_count} choices"
        )
    if raw <= 0.5:
        # Above chance but not above a coin flip; no opposite answer exists,
        # store as-is shifted into the open interval via the epsilon rule.
        return ClampedAccuracy(max(raw, 0.5 + ACCURACY_EPSILON), False)
    return ClampedAccuracy(raw, False)


@dataclass(frozen=True)
class Category:
    """A task subject area; indices are dense 0..L-1 within one engine."""

    id: str
    index: int

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"category index must be non-negative, got {self.index}")


@dataclass
class Answer:
    """One worker's choice on one task (possibly SKIP), timestamped."""

    worker_id: str
    task_id: str
    choice: int
    submit_time: float
    latency: float

    def __post_init__(self) -> None:
        if self.latency < 0:
            raise ValueError(f"latency must be non-negative, got {self.latency}")

    @property
    def is_skip(self) -> bool:
        return self.choice == SKIP


@dataclass
class Task:
    """A unit of work with a quality threshold and an accumulating answer log."""

    id: str
    category: str
    quality_threshold: float
    start_time: float = 0.0
    choice_count: int = 2
    ground_truth: Optional[int] = None
    finish_time: Optional[float] = None
    answers: list[Answer] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not 0.5 < self.quality_threshold < 1.0:
            raise ValueError(
                f"quality threshold must lie in (0.5, 1), got {self.quality_threshold}"
            )
        if self.choice_count < 2:
            raise ValueError(f"choice_count must be at least 2, got {self.choice_count}")
        if self.ground_truth is not None and not 0 <= self.ground_truth < self.choice_count:
            raise ValueError(
                f"ground truth {self.ground_truth} outside [0, {self.choice_count})"
            )
        if self.finish_time is not None and self.finish_time < self.start_time:
            raise ValueError("finish time precedes start time")

    @property
    def completed(self) -> bool:
        return self.finish_time is not None

    @property
    def latency(self) -> Optional[float]:
        if self.finish_time is None:
            return None
        return self.finish_time - self.start_time

    @property
    def skip_count(self) -> int:
        return sum(1 for a in self.answers if a.is_skip)

    def record_answer(self, answer: Answer) -> None:
        if answer.task_id != self.id:
            raise ValueError(f"answer for task {answer.task_id} recorded on {self.id}")
        if not answer.is_skip and not 0 <= answer.choice < self.choice_count:
            raise ValueError(
                f"choice {answer.choice} outside [0, {self.choice_count})"
            )
        if answer.submit_time < self.start_time:
            raise ValueError("answer submitted before the task started")
        self.answers.append(answer)

    def complete(self, finish_time: float) -> None:
        if finish_time < self.start_time:
            raise ValueError("finish time precedes start time")
        self.finish_time = finish_time


@dataclass
class Worker:
    """A labor unit with per-category accuracy and response-time state.

    Accuracies are stored already clamped into (0.5, 1]; use
    :func:`clamp_accuracy` before construction or assignment.
    """

    id: str
    subscriptions: set[str] = field(default_factory=set)
    accuracy: dict[str, float] = field(default_factory=dict)
    predicted_response: dict[str, float] = field(default_factory=dict)
    response_history: dict[str, list[tuple[float, float]]] = field(default_factory=dict)
    online: bool = True

    def __post_init__(self) -> None:
        for category, value in self.accuracy.items():
            if not 0.5 < value <= 1.0:
                raise ValueError(
                    f"stored accuracy for {category} must lie in (0.5, 1], got {value}"
                )
        for category, value in self.predicted_response.items():
            if value <= 0:
                raise ValueError(
                    f"predicted response for {category} must be positive, got {value}"
                )
        for category, history in self.response_history.items():
            stamps = [t for t, _ in history]
            if any(b <= a for a, b in zip(stamps, stamps[1:])):
                raise ValueError(
                    f"response history timestamps for {category} must strictly increase"
                )

    def record_response(self, category: str, timestamp: float, seconds: float) -> None:
        history = self.response_history.setdefault(category, [])
        if history and timestamp <= history[-1][0]:
            raise ValueError("response timestamps must strictly increase per category")
        history.append((timestamp, seconds))


@dataclass
class Assignment:
    """A batch of (task, worker) pairs committed in one scheduling step."""

    pairs: list[tuple[str, str]] = field(default_factory=list)
    round_id: Optional[int] = None

    def __post_init__(self) -> None:
        if len(set(self.pairs)) != len(self.pairs):
            raise ValueError("duplicate (task, worker) pair in assignment")

    def add(self, task_id: str, worker_id: str) -> None:
        pair = (task_id, worker_id)
        if pair in self.pairs:
            raise ValueError(f"duplicate pair {pair}")
        self.pairs.append(pair)
