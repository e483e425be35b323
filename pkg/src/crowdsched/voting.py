"""Expected-accuracy computation and answer aggregation.

The expected accuracy of a worker set is the probability that a strict
majority of its members answer correctly, with independent per-worker
accuracies. Direct subset enumeration is exponential; everything here runs
on the distribution of the number of correct answers, updated by dynamic
programming in O(k) per added worker and O(k^2) from scratch.
"""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple, Optional, Sequence

from .errors import (
    BadChoiceCountError,
    BadPriorError,
    EmptyWorkerSetError,
    EvenSetNotComparableError,
)
from .model import Answer

MAJORITY = "majority"
WEIGHTED_MAJORITY = "weighted_majority"
HALF = "half"
BAYESIAN = "bayesian"

AGGREGATION_SCHEMES = (MAJORITY, WEIGHTED_MAJORITY, HALF, BAYESIAN)


def _check_accuracy(value: float) -> float:
    if not 0.5 < value <= 1.0:
        raise ValueError(f"worker accuracy must lie in (0.5, 1], got {value}")
    return float(value)


def _majority_threshold(size: int) -> int:
    # ceil(k/2): strict majority for odd k, the formula-as-written cut for even k.
    return (size + 1) // 2


class WorkerSetAccuracy:
    """A growing pool of worker accuracies with cached correct-count pmf.

    ``pmf[x]`` is the probability that exactly ``x`` pool members answer
    correctly. Adding a worker is a single O(k) convolution step, which is
    the incremental identity the batch scheduler leans on.
    """

    def __init__(self, accuracies: Iterable[float] = ()):
        self._accuracies: list[float] = []
        self._pmf: list[float] = [1.0]
        for value in accuracies:
            self.add(value)

    @property
    def size(self) -> int:
        return len(self._accuracies)

    @property
    def accuracies(self) -> tuple[float, ...]:
        return tuple(self._accuracies)

    @property
    def correct_count_pmf(self) -> tuple[float, ...]:
        return tuple(self._pmf)

    def add(self, accuracy: float) -> None:
        value = _check_accuracy(accuracy)
        self._accuracies.append(value)
        old = self._pmf
        new = [0.0] * (len(old) + 1)
        for x, p in enumerate(old):
            new[x] += p * (1.0 - value)
            new[x + 1] += p * value
        self._pmf = new

    def expected_accuracy(self, allow_even: bool = False) -> float:
        """Probability that at least ceil(k/2) members are correct."""
        k = self.size
        if k == 0:
            raise EmptyWorkerSetError("no workers in the set")
        if k % 2 == 0 and not allow_even:
            raise EvenSetNotComparableError(
                f"set size {k} is even; majority accuracy compares at odd sizes"
            )
        return min(1.0, math.fsum(self._pmf[_majority_threshold(k):]))

    def copy(self) -> "WorkerSetAccuracy":
        clone = WorkerSetAccuracy()
        clone._accuracies = list(self._accuracies)
        clone._pmf = list(self._pmf)
        return clone


def expected_accuracy_majority(
    accuracies: Sequence[float], allow_even: bool = False
) -> float:
    """Expected accuracy of a worker set under majority voting.

    Odd sizes by default; pass ``allow_even`` for the formula-as-written
    behaviour at even sizes (at least half correct counts as success),
    which exists so incremental updates can be cross-checked at every step.
    """
    return WorkerSetAccuracy(accuracies).expected_accuracy(allow_even=allow_even)


def expected_accuracy_incremental(
    base: WorkerSetAccuracy, new_worker_accuracy: float, allow_even: bool = False
) -> float:
    """Add one worker to the pool and return the updated expected accuracy."""
    base.add(new_worker_accuracy)
    return base.expected_accuracy(allow_even=allow_even)


def _all_bins_below(bins: int, balls: int, cap: int) -> float:
    """Probability that ``balls`` uniform iid throws into ``bins`` leave every
    bin strictly below ``cap``."""
    if balls == 0:
        return 1.0
    if cap <= 0 or bins <= 0:
        return 0.0
    if bins * (cap - 1) < balls:
        return 0.0
    # ways[r] = number of assignments of r labelled balls into the bins seen
    # so far with every bin below cap.
    ways = [0.0] * (balls + 1)
    ways[0] = 1.0
    for _ in range(bins):
        nxt = [0.0] * (balls + 1)
        for r, w in enumerate(ways):
            if w == 0.0:
                continue
            for j in range(min(cap - 1, balls - r) + 1):
                nxt[r + j] += w * math.comb(r + j, j)
        ways = nxt
    return ways[balls] / float(bins) ** balls


def expected_accuracy_multichoice_majority(
    accuracies: Sequence[float], choice_count: int
) -> float:
    """Probability the correct choice wins a strict plurality among R choices.

    Wrong answers are modelled as uniform over the R-1 incorrect choices and
    plurality ties count as failure. With R=2 and an odd worker count this is
    exactly the binary majority accuracy.
    """
    if choice_count < 2:
        raise BadChoiceCountError(f"need at least 2 choices, got {choice_count}")
    if not accuracies:
        raise EmptyWorkerSetError("no workers in the set")
    floor = 1.0 / choice_count
    for value in accuracies:
        if not floor < value <= 1.0:
            raise ValueError(
                f"accuracy must lie in (1/{choice_count}, 1], got {value}"
            )
    k = len(accuracies)
    pmf = [1.0]
    for value in accuracies:
        new = [0.0] * (len(pmf) + 1)
        for x, p in enumerate(pmf):
            new[x] += p * (1.0 - value)
            new[x + 1] += p * value
        pmf = new
    total = 0.0
    for correct in range(1, k + 1):
        if pmf[correct] == 0.0:
            continue
        total += pmf[correct] * _all_bins_below(
            choice_count - 1, k - correct, correct
        )
    return total


class AggregateResult(NamedTuple):
    """Winning choice (None when the scheme declares no winner) and its support."""

    choice: Optional[int]
    support: float


def _votes(answers: Sequence[Answer]) -> list[Answer]:
    return [a for a in answers if not a.is_skip]


def aggregate(
    answers: Sequence[Answer],
    scheme: str = MAJORITY,
    accuracies: Optional[dict[str, float]] = None,
    priors: Optional[Sequence[float]] = None,
) -> AggregateResult:
    """Aggregate the non-skip answers of one task under the given scheme.

    majority            plurality winner, support = its vote fraction
    weighted_majority   choice with the largest accuracy mass among its voters
    half                plurality winner only if it holds more than half the votes
    bayesian            choice maximising the product of prior*accuracy over voters

    Ties yield no winner. An empty vote set yields (None, 0.0).
    ``accuracies`` maps worker id to clamped accuracy and is required for the
    weighted and bayesian schemes; ``priors`` (one positive weight per choice,
    normalised internally) is required for bayesian.
    """
    if scheme not in AGGREGATION_SCHEMES:
        raise ValueError(f"unknown aggregation scheme {scheme!r}")
    votes = _votes(answers)
    if not votes:
        return AggregateResult(None, 0.0)

    if scheme in (MAJORITY, HALF):
        counts: dict[int, int] = {}
        for vote in votes:
            counts[vote.choice] = counts.get(vote.choice, 0) + 1
        best = max(counts.values())
        leaders = sorted(c for c, n in counts.items() if n == best)
        support = best / len(votes)
        if len(leaders) > 1:
            return AggregateResult(None, support)
        if scheme == HALF and best * 2 <= len(votes):
            return AggregateResult(None, support)
        return AggregateResult(leaders[0], support)

    if accuracies is None:
        raise ValueError(f"scheme {scheme!r} needs per-worker accuracies")

    if scheme == WEIGHTED_MAJORITY:
        mass: dict[int, float] = {}
        for vote in votes:
            mass[vote.choice] = mass.get(vote.choice, 0.0) + accuracies[vote.worker_id]
        total = sum(mass.values())
        best = max(mass.values())
        leaders = sorted(c for c, m in mass.items() if math.isclose(m, best))
        support = best / total if total > 0 else 0.0
        if len(leaders) > 1:
            return AggregateResult(None, support)
        return AggregateResult(leaders[0], support)

    # bayesian
    if priors is None:
        raise BadPriorError("bayesian voting needs choice priors")
    priors = [float(p) for p in priors]
    if any(p <= 0 for p in priors) or sum(priors) <= 0:
        raise BadPriorError("priors must be positive")
    voted = {vote.choice for vote in votes}
    if max(voted) >= len(priors):
        raise BadPriorError(
            f"need a prior for every choice up to {max(voted)}, got {len(priors)}"
        )
    scale = sum(priors)
    normalised = [p / scale for p in priors]
    scores: dict[int, float] = {}
    for vote in votes:
        prior = normalised[vote.choice]
        scores[vote.choice] = scores.get(vote.choice, 1.0) * (
            prior * accuracies[vote.worker_id]
        )
    best = max(scores.values())
    leaders = sorted(c for c, s in scores.items() if math.isclose(s, best))
    if len(leaders) > 1:
        return AggregateResult(None, best)
    return AggregateResult(leaders[0], best)
