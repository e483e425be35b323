"""Voting math against brute-force enumeration oracles."""

import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdsched.errors import (
    BadChoiceCountError,
    BadPriorError,
    EmptyWorkerSetError,
    EvenSetNotComparableError,
)
from crowdsched.model import SKIP, Answer
from crowdsched.voting import (
    AggregateResult,
    WorkerSetAccuracy,
    aggregate,
    expected_accuracy_incremental,
    expected_accuracy_majority,
    expected_accuracy_multichoice_majority,
)


def brute_force_majority(accuracies, threshold=None):
    """Enumerate all 2^k correctness outcomes and sum the majority-correct mass."""
    k = len(accuracies)
    if threshold is None:
        threshold = (k + 1) // 2
    total = 0.0
    for outcome in itertools.product((0, 1), repeat=k):
        if sum(outcome) < threshold:
            continue
        p = 1.0
        for correct, acc in zip(outcome, accuracies):
            p *= acc if correct else 1.0 - acc
        total += p
    return total


def brute_force_plurality(accuracies, choice_count):
    """Enumerate all R^k joint choices with uniform wrong-answer splitting."""
    k = len(accuracies)
    total = 0.0
    for choices in itertools.product(range(choice_count), repeat=k):
        p = 1.0
        for choice, acc in zip(choices, accuracies):
            p *= acc if choice == 0 else (1.0 - acc) / (choice_count - 1)
        counts = [choices.count(r) for r in range(choice_count)]
        if counts[0] > max(counts[1:]):
            total += p
    return total


def vote(worker, choice, t=0.0):
    return Answer(worker_id=worker, task_id="t", choice=choice, submit_time=t, latency=1.0)


class TestExpectedAccuracyMajority:
    def test_single_worker(self):
        assert expected_accuracy_majority([0.8]) == pytest.approx(0.8)

    def test_three_workers_mixed(self):
        # 2^3 oracle gives 0.902 for this pool
        assert expected_accuracy_majority([0.9, 0.8, 0.7]) == pytest.approx(0.902)
        assert brute_force_majority([0.9, 0.8, 0.7]) == pytest.approx(0.902)

    def test_three_workers_equal(self):
        # 0.8^3 + 3 * 0.8^2 * 0.2
        assert expected_accuracy_majority([0.8, 0.8, 0.8]) == pytest.approx(0.896)

    def test_matches_enumeration_oracle(self):
        rng = random.Random(7)
        for _ in range(200):
            k = rng.choice([1, 3, 5, 7, 9])
            accs = [rng.uniform(0.5 + 1e-6, 1.0) for _ in range(k)]
            assert expected_accuracy_majority(accs) == pytest.approx(
                brute_force_majority(accs), abs=1e-9
            )

    def test_even_size_rejected_by_default(self):
        with pytest.raises(EvenSetNotComparableError):
            expected_accuracy_majority([0.8, 0.7])

    def test_even_size_formula_as_written(self):
        accs = [0.8, 0.7]
        expected = brute_force_majority(accs, threshold=1)
        assert expected_accuracy_majority(accs, allow_even=True) == pytest.approx(expected)

    def test_empty_set(self):
        with pytest.raises(EmptyWorkerSetError):
            expected_accuracy_majority([])

    def test_accuracy_range_validated(self):
        with pytest.raises(ValueError):
            expected_accuracy_majority([0.5])
        with pytest.raises(ValueError):
            expected_accuracy_majority([1.2])

    @given(
        st.lists(
            st.floats(min_value=0.5001, max_value=1.0),
            min_size=1,
            max_size=9,
        ).filter(lambda xs: len(xs) % 2 == 1)
    )
    @settings(max_examples=150, deadline=None)
    def test_result_above_half(self, accs):
        value = expected_accuracy_majority(accs)
        assert 0.5 < value <= 1.0 + 1e-12

    @given(
        st.lists(st.floats(min_value=0.51, max_value=0.99), min_size=1, max_size=7)
        .filter(lambda xs: len(xs) % 2 == 1),
        st.data(),
    )
    @settings(max_examples=100, deadline=None)
    def test_monotone_in_single_accuracy(self, accs, data):
        """Raising one accuracy strictly increases the value (unless already 1)."""
        idx = data.draw(st.integers(min_value=0, max_value=len(accs) - 1))
        raised = list(accs)
        raised[idx] = data.draw(
            st.floats(min_value=min(1.0, accs[idx] + 1e-3), max_value=1.0)
        )
        before = expected_accuracy_majority(accs)
        after = expected_accuracy_majority(raised)
        if before >= 1.0 - 1e-12:
            assert after == pytest.approx(1.0)
        else:
            assert after > before


class TestIncremental:
    def test_matches_direct_evaluation(self):
        base = WorkerSetAccuracy([0.9, 0.8])
        assert expected_accuracy_incremental(base, 0.7) == pytest.approx(0.902, abs=1e-9)

    def test_empty_base(self):
        base = WorkerSetAccuracy()
        assert expected_accuracy_incremental(base, 0.8) == pytest.approx(0.8)

    def test_perfect_ceiling(self):
        base = WorkerSetAccuracy([1.0, 1.0])
        assert expected_accuracy_incremental(base, 1.0) == pytest.approx(1.0)

    def test_tracks_direct_at_every_size(self):
        """Incremental updates equal direct evaluation at every step, even sizes
        included (formula-as-written cross-check mode)."""
        rng = random.Random(11)
        for _ in range(50):
            accs = [rng.uniform(0.5001, 1.0) for _ in range(rng.randint(1, 8))]
            pool = WorkerSetAccuracy()
            for i, acc in enumerate(accs):
                step = expected_accuracy_incremental(pool, acc, allow_even=True)
                direct = brute_force_majority(accs[: i + 1], threshold=(i + 2) // 2)
                assert step == pytest.approx(direct, abs=1e-9)

    def test_growth_along_as_written_chain(self):
        """Adding a worker never decreases the formula-as-written value when the
        threshold is unchanged (odd size k to even size k+1)."""
        rng = random.Random(13)
        for _ in range(200):
            k = rng.choice([1, 3, 5])
            accs = [rng.uniform(0.5001, 1.0) for _ in range(k)]
            extra = rng.uniform(0.5001, 1.0)
            before = expected_accuracy_majority(accs)
            after = expected_accuracy_majority(accs + [extra], allow_even=True)
            assert after >= before - 1e-12

    def test_odd_to_odd_growth_can_fail(self):
        """Documented counterexample: two weak additions can outvote a strong
        single worker, so odd-to-odd growth is not guaranteed in general."""
        before = expected_accuracy_majority([0.99])
        after = expected_accuracy_majority([0.99, 0.51, 0.51])
        assert after == pytest.approx(0.754902, abs=1e-9)
        assert after < before

    def test_cached_pmf_consistent(self):
        pool = WorkerSetAccuracy([0.9, 0.8, 0.7])
        assert math.fsum(pool.correct_count_pmf) == pytest.approx(1.0, abs=1e-12)
        assert pool.expected_accuracy() == pytest.approx(
            expected_accuracy_majority([0.9, 0.8, 0.7]), abs=1e-12
        )

    def test_copy_is_independent(self):
        pool = WorkerSetAccuracy([0.9])
        clone = pool.copy()
        clone.add(0.8)
        assert pool.size == 1
        assert clone.size == 2


class TestMultichoice:
    def test_single_worker(self):
        assert expected_accuracy_multichoice_majority([0.8], 3) == pytest.approx(0.8)

    def test_binary_reduces_to_majority(self):
        accs = [0.7, 0.7, 0.7]
        assert expected_accuracy_multichoice_majority(accs, 2) == pytest.approx(0.784)
        assert expected_accuracy_multichoice_majority(accs, 2) == pytest.approx(
            expected_accuracy_majority(accs)
        )

    def test_three_choices_against_oracle(self):
        accs = [0.6, 0.6, 0.6]
        oracle = brute_force_plurality(accs, 3)
        assert expected_accuracy_multichoice_majority(accs, 3) == pytest.approx(
            oracle, abs=1e-12
        )

    def test_random_pools_against_oracle(self):
        rng = random.Random(23)
        for _ in range(40):
            choice_count = rng.randint(2, 4)
            k = rng.randint(1, 5)
            accs = [rng.uniform(1.0 / choice_count + 0.05, 1.0) for _ in range(k)]
            oracle = brute_force_plurality(accs, choice_count)
            assert expected_accuracy_multichoice_majority(
                accs, choice_count
            ) == pytest.approx(oracle, abs=1e-9)

    def test_bad_choice_count(self):
        with pytest.raises(BadChoiceCountError):
            expected_accuracy_multichoice_majority([0.8], 1)

    def test_at_chance_rejected(self):
        with pytest.raises(ValueError):
            expected_accuracy_multichoice_majority([1.0 / 3.0], 3)


class TestAggregate:
    def test_majority_plurality(self):
        answers = [vote("a", 1), vote("b", 1), vote("c", 0)]
        assert aggregate(answers) == AggregateResult(1, pytest.approx(2 / 3))

    def test_majority_tie_is_failure(self):
        answers = [vote("a", 0), vote("b", 1)]
        result = aggregate(answers)
        assert result.choice is None
        assert result.support == pytest.approx(0.5)

    def test_half_requires_strict_majority(self):
        answers = [vote("a", 0), vote("b", 1), vote("c", 2)]
        result = aggregate(answers, scheme="half")
        assert result.choice is None
        assert result.support == pytest.approx(1 / 3)

    def test_half_matches_majority_when_strict(self):
        rng = random.Random(3)
        for _ in range(50):
            answers = [vote(f"w{i}", rng.randint(0, 1)) for i in range(rng.choice([3, 5, 7]))]
            maj = aggregate(answers, scheme="majority")
            half = aggregate(answers, scheme="half")
            if maj.choice is not None and maj.support > 0.5:
                assert half.choice == maj.choice

    def test_weighted_majority(self):
        answers = [vote("a", 0), vote("b", 1), vote("c", 1)]
        accs = {"a": 0.99, "b": 0.6, "c": 0.6}
        result = aggregate(answers, scheme="weighted_majority", accuracies=accs)
        assert result.choice == 1
        assert result.support == pytest.approx(1.2 / 2.19)

    def test_bayesian_single_voter(self):
        answers = [vote("a", 1)]
        result = aggregate(
            answers, scheme="bayesian", accuracies={"a": 0.9}, priors=[0.5, 0.5]
        )
        assert result == AggregateResult(1, pytest.approx(0.45))

    def test_bayesian_argmax_invariant_under_prior_scaling(self):
        rng = random.Random(17)
        for _ in range(60):
            n = rng.randint(1, 7)
            answers = [vote(f"w{i}", rng.randint(0, 2)) for i in range(n)]
            accs = {f"w{i}": rng.uniform(0.51, 1.0) for i in range(n)}
            priors = [rng.uniform(0.1, 1.0) for _ in range(3)]
            scale = rng.uniform(0.5, 20.0)
            base = aggregate(answers, scheme="bayesian", accuracies=accs, priors=priors)
            scaled = aggregate(
                answers,
                scheme="bayesian",
                accuracies=accs,
                priors=[p * scale for p in priors],
            )
            assert base.choice == scaled.choice
            assert base.support == pytest.approx(scaled.support)

    def test_bayesian_bad_priors(self):
        answers = [vote("a", 0)]
        with pytest.raises(BadPriorError):
            aggregate(answers, scheme="bayesian", accuracies={"a": 0.9}, priors=[0.0, 1.0])
        with pytest.raises(BadPriorError):
            aggregate(
                [vote("a", 1)], scheme="bayesian", accuracies={"a": 0.9}, priors=[1.0]
            )

    def test_skips_are_ignored(self):
        answers = [vote("a", 1), vote("b", SKIP), vote("c", 1)]
        result = aggregate(answers)
        assert result.choice == 1
        assert result.support == pytest.approx(1.0)

    def test_empty_votes(self):
        assert aggregate([]) == AggregateResult(None, 0.0)
        assert aggregate([vote("a", SKIP)]) == AggregateResult(None, 0.0)

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            aggregate([vote("a", 0)], scheme="quorum")
