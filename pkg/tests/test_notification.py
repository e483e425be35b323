"""Availability KDE, EM weight fitting, dominance ranking, invitations."""

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdsched.notification import (
    ACCEPTANCE_WINDOW_SECONDS,
    WEEK_SECONDS,
    AvailabilityModel,
    EventLog,
    FriendGraph,
    KdeScale,
    WorkerProspect,
    acceptance_probability,
    adaptive_kde,
    adaptive_kde_scale,
    availability_probability,
    circular_offset,
    dominates,
    em_fit,
    fit_availability_model,
    ranking_score,
    rule_of_thumb_bandwidth,
    worker_notify,
    wrap_to_week,
)

MINUTE_GRID = np.arange(0.0, WEEK_SECONDS, 60.0)


def quadrature(density_values, step=60.0):
    return float(np.sum(density_values) * step)


class TestWrapping:
    def test_wrap_to_week(self):
        wrapped = wrap_to_week([WEEK_SECONDS + 10.0, 5.0, 2 * WEEK_SECONDS - 1.0])
        assert wrapped.tolist() == [5.0, 10.0, WEEK_SECONDS - 1.0]

    def test_circular_offset_shortest_path(self):
        assert circular_offset(10.0, WEEK_SECONDS - 10.0) == pytest.approx(20.0)
        assert circular_offset(WEEK_SECONDS - 10.0, 10.0) == pytest.approx(-20.0)

    def test_event_log_validates(self):
        with pytest.raises(ValueError):
            EventLog(worker_id="w", timestamps=np.array([WEEK_SECONDS + 1.0]))
        log = EventLog.from_raw("w", [WEEK_SECONDS + 1.0, 3.0])
        assert log.timestamps.tolist() == [1.0, 3.0]


class TestFriendGraph:
    def test_symmetric(self):
        graph = FriendGraph()
        graph.add_edge("a", "b")
        assert graph.friends_of("a") == {"b"}
        assert graph.friends_of("b") == {"a"}

    def test_two_step(self):
        graph = FriendGraph()
        graph.add_edge("a", "b")
        graph.add_edge("b", "c")
        assert graph.friends_of("a", steps=1) == {"b"}
        assert graph.friends_of("a", steps=2) == {"b", "c"}


class TestRuleOfThumbBandwidth:
    def test_unit_std_hundred_samples(self):
        # 1.06 * 1 * 100^(-1/5): build 100 samples with sample std exactly 1
        base = [0.0, 2.0] * 50
        samples = np.asarray(base)
        samples = (samples - samples.mean()) / np.std(samples, ddof=1)
        assert np.std(samples, ddof=1) == pytest.approx(1.0)
        assert rule_of_thumb_bandwidth(samples) == pytest.approx(0.42195, abs=1e-4)

    def test_zero_spread_falls_back(self):
        assert rule_of_thumb_bandwidth([7.0, 7.0, 7.0]) == 3600.0
        assert rule_of_thumb_bandwidth([7.0]) == 3600.0

    def test_closed_form(self):
        samples = np.arange(32, dtype=float)
        expected = 1.06 * np.std(samples, ddof=1) * 32 ** (-0.2)
        assert rule_of_thumb_bandwidth(samples) == pytest.approx(expected)


class TestAdaptiveKde:
    def test_single_sample_peak(self):
        scale = KdeScale(samples=np.array([1000.0]), bandwidths=np.array([1.0]))
        assert adaptive_kde(scale, 1000.0)[0] == pytest.approx(1.0 / math.sqrt(2 * math.pi))

    def test_far_from_samples_is_tiny(self):
        scale = KdeScale(samples=np.array([0.0]), bandwidths=np.array([3600.0]))
        far = 3600.0 * 11
        assert adaptive_kde(scale, far)[0] < 1e-12

    def test_duplicate_samples_average_to_same_density(self):
        one = KdeScale(samples=np.array([500.0]), bandwidths=np.array([50.0]))
        two = KdeScale(
            samples=np.array([500.0, 500.0]), bandwidths=np.array([50.0, 50.0])
        )
        grid = np.linspace(0, 2000, 64)
        assert np.allclose(one.density(grid), two.density(grid))

    def test_empty_scale_density_zero(self):
        scale = adaptive_kde_scale([])
        assert scale.density([123.0]).tolist() == [0.0]

    def test_wraps_across_week_boundary(self):
        scale = KdeScale(samples=np.array([10.0]), bandwidths=np.array([60.0]))
        before_midnight = scale.density(WEEK_SECONDS - 10.0)[0]
        symmetric = scale.density(30.0)[0]
        assert before_midnight == pytest.approx(symmetric, rel=1e-9)

    def test_each_scale_integrates_to_one(self):
        rng = random.Random(41)
        for n in (1, 3, 20, 200):
            events = [rng.uniform(0, WEEK_SECONDS) for _ in range(n)]
            scale = adaptive_kde_scale(events)
            assert quadrature(scale.density(MINUTE_GRID)) == pytest.approx(1.0, abs=0.01)

    def test_integrates_to_one_with_huge_bandwidth(self):
        # bandwidth wider than the week still integrates thanks to wrapping
        scale = KdeScale(
            samples=np.array([100.0, 200000.0]),
            bandwidths=np.array([WEEK_SECONDS, WEEK_SECONDS / 2]),
        )
        assert quadrature(scale.density(MINUTE_GRID)) == pytest.approx(1.0, abs=0.01)

    def test_neighbor_bandwidths_adapt(self):
        # a dense cluster gets narrow kernels, an isolated point a wide one
        events = [1000.0, 1010.0, 1020.0, 1030.0, 300000.0]
        scale = adaptive_kde_scale(events, neighbor_ratio=0.4)
        assert scale.bandwidths[0] < scale.bandwidths[-1]


class TestEmFit:
    def test_single_scale_immediate(self):
        scale = adaptive_kde_scale([100.0, 200.0, 300.0])
        weights, trail = em_fit([scale], [150.0])
        assert weights.tolist() == [1.0]

    def test_zero_density_scale_drops_out(self):
        useful = KdeScale(samples=np.array([1000.0]), bandwidths=np.array([100.0]))
        useless = KdeScale(samples=np.empty(0), bandwidths=np.empty(0))
        weights, _ = em_fit([useful, useless], [900.0, 1000.0, 1100.0])
        assert weights[1] == pytest.approx(0.0, abs=1e-9)
        assert weights[0] == pytest.approx(1.0, abs=1e-9)

    def test_log_likelihood_non_decreasing(self):
        rng = random.Random(4)
        for _ in range(25):
            scale_a = adaptive_kde_scale(
                [rng.gauss(80000, 2000) % WEEK_SECONDS for _ in range(30)]
            )
            scale_b = adaptive_kde_scale(
                [rng.gauss(400000, 5000) % WEEK_SECONDS for _ in range(30)]
            )
            validation = [
                rng.gauss(80000, 3000) % WEEK_SECONDS for _ in range(20)
            ] + [rng.gauss(400000, 3000) % WEEK_SECONDS for _ in range(10)]
            _, trail = em_fit([scale_a, scale_b], validation)
            assert all(b >= a - 1e-9 for a, b in zip(trail, trail[1:]))

    def test_weights_stay_on_simplex(self):
        rng = random.Random(6)
        scale_a = adaptive_kde_scale([rng.uniform(0, 100000) for _ in range(20)])
        scale_b = adaptive_kde_scale([rng.uniform(200000, 600000) for _ in range(20)])
        validation = [rng.uniform(0, WEEK_SECONDS) for _ in range(30)]
        weights, _ = em_fit([scale_a, scale_b], validation)
        assert weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(weights >= 0)

    def test_recovers_known_mixture_weights(self):
        """Sample 500 validation points from a known 0.7/0.3 mixture of two
        well-separated scales; EM must recover the weights within 0.05."""
        rng = np.random.default_rng(12)
        morning = rng.normal(100000, 4000, size=60) % WEEK_SECONDS
        evening = rng.normal(450000, 4000, size=60) % WEEK_SECONDS
        scale_a = adaptive_kde_scale(morning)
        scale_b = adaptive_kde_scale(evening)

        validation = []
        for _ in range(500):
            scale = scale_a if rng.random() < 0.7 else scale_b
            idx = rng.integers(scale.size)
            validation.append(
                (scale.samples[idx] + rng.normal(0.0, scale.bandwidths[idx]))
                % WEEK_SECONDS
            )
        weights, _ = em_fit([scale_a, scale_b], validation)
        assert weights[0] == pytest.approx(0.7, abs=0.05)
        assert weights[1] == pytest.approx(0.3, abs=0.05)

    def test_zero_density_validation_points_warn(self):
        scale = KdeScale(samples=np.array([1000.0]), bandwidths=np.array([1.0]))
        with pytest.warns(UserWarning, match="zero density"):
            weights, _ = em_fit([scale, scale], [1000.0, 300000.0])
        assert weights.sum() == pytest.approx(1.0)


class TestAvailabilityModel:
    def test_degenerate_mixture_equals_single_scale(self):
        base = adaptive_kde_scale([1000.0, 5000.0, 9000.0])
        other = adaptive_kde_scale([400000.0])
        model = AvailabilityModel(scales=[base, other], weights=np.array([1.0, 0.0]))
        at = 4321.0
        assert availability_probability(model, at) == pytest.approx(
            float(base.density(at)[0])
        )

    def test_uniform_weights_over_identical_scales(self):
        base = adaptive_kde_scale([1000.0, 5000.0, 9000.0])
        model = AvailabilityModel(
            scales=[base, base, base], weights=np.full(3, 1 / 3)
        )
        at = 2500.0
        assert availability_probability(model, at) == pytest.approx(
            float(base.density(at)[0])
        )

    def test_cold_start_borrows_from_friends(self):
        """A worker with one stray event gets a higher mixture density at the
        friends' active hour than their own-history KDE gives."""
        friend_hour = 200000.0
        friend_events = [friend_hour + delta for delta in range(-50, 51, 10)]
        model = fit_availability_model(
            own_events=[friend_hour + 5.0, 600000.0],
            friend_events=friend_events,
            global_events=friend_events + [600000.0],
        )
        self_only = adaptive_kde_scale([600000.0])
        assert availability_probability(model, friend_hour) > float(
            self_only.density(friend_hour)[0]
        )

    def test_fitted_scales_integrate_to_one(self):
        rng = random.Random(77)
        own = [rng.uniform(0, WEEK_SECONDS) for _ in range(40)]
        friends = [rng.uniform(0, WEEK_SECONDS) for _ in range(60)]
        model = fit_availability_model(own, friends, own + friends)
        for scale in model.scales:
            if scale.size:
                assert quadrature(scale.density(MINUTE_GRID)) == pytest.approx(
                    1.0, abs=0.01
                )

    def test_no_events_keeps_uniform_weights(self):
        model = fit_availability_model([], [100.0, 200.0], [100.0, 200.0, 300.0])
        assert model.weights.tolist() == pytest.approx([1 / 3, 1 / 3, 1 / 3])


def prospect(worker_id, availability, accuracy, response):
    return WorkerProspect(
        worker_id=worker_id,
        availability=availability,
        mean_accuracy=accuracy,
        mean_response=response,
    )


class TestDominance:
    def test_strict_on_all_three(self):
        assert dominates(prospect("x", 0.9, 0.9, 5.0), prospect("y", 0.5, 0.8, 10.0))

    def test_identical_do_not_dominate(self):
        a = prospect("x", 0.9, 0.9, 5.0)
        b = prospect("y", 0.9, 0.9, 5.0)
        assert not dominates(a, b)
        assert not dominates(b, a)

    def test_accuracy_condition(self):
        assert not dominates(
            prospect("x", 0.9, 0.7, 5.0), prospect("y", 0.5, 0.8, 10.0)
        )

    @given(
        st.lists(
            st.tuples(
                st.floats(min_value=0.0, max_value=1.0),
                st.floats(min_value=0.5, max_value=1.0),
                st.floats(min_value=0.5, max_value=60.0),
            ),
            min_size=2,
            max_size=12,
        )
    )
    @settings(max_examples=80, deadline=None)
    def test_irreflexive_antisymmetric_and_scores_sum(self, rows):
        cohort = [prospect(f"w{i}", *row) for i, row in enumerate(rows)]
        pair_count = 0
        for a in cohort:
            assert not dominates(a, a)
            for b in cohort:
                if a.worker_id == b.worker_id:
                    continue
                if dominates(a, b):
                    assert not dominates(b, a)
                    pair_count += 1
        assert sum(ranking_score(p, cohort) for p in cohort) == pair_count

    def test_ranking_matches_recount(self):
        rng = random.Random(10)
        cohort = [
            prospect(
                f"w{i:02d}",
                rng.random(),
                rng.uniform(0.5, 1.0),
                rng.uniform(1.0, 30.0),
            )
            for i in range(50)
        ]
        for p in cohort:
            recount = sum(
                1
                for other in cohort
                if other.worker_id != p.worker_id and dominates(p, other)
            )
            assert ranking_score(p, cohort) == recount

    def test_dominating_all_in_three_cohort(self):
        cohort = [
            prospect("a", 0.9, 0.95, 2.0),
            prospect("b", 0.5, 0.80, 9.0),
            prospect("c", 0.4, 0.70, 12.0),
        ]
        assert ranking_score(cohort[0], cohort) == 2

    def test_identical_cohort_all_zero(self):
        cohort = [prospect(f"w{i}", 0.5, 0.8, 5.0) for i in range(4)]
        assert all(ranking_score(p, cohort) == 0 for p in cohort)


class TestWorkerNotify:
    def test_single_sure_worker(self):
        pool = [
            prospect("a", 1.0 / ACCEPTANCE_WINDOW_SECONDS, 0.9, 5.0),
            prospect("b", 0.00001, 0.8, 9.0),
        ]
        invited = worker_notify(pool, expected_acceptances=1.0)
        assert [p.worker_id for p in invited] == ["a"]

    def test_quarter_probability_needs_four(self):
        density = 0.25 / ACCEPTANCE_WINDOW_SECONDS
        pool = [prospect(f"w{i}", density, 0.8, 5.0) for i in range(10)]
        invited = worker_notify(pool, expected_acceptances=1.0)
        assert len(invited) == 4

    def test_empty_pool(self):
        assert worker_notify([], expected_acceptances=2.0) == []

    def test_exhausts_pool_when_need_unmet(self):
        pool = [prospect(f"w{i}", 1e-9, 0.8, 5.0) for i in range(5)]
        invited = worker_notify(pool, expected_acceptances=3.0)
        assert len(invited) == 5

    def test_greedy_selection_is_minimal(self):
        rng = random.Random(8)
        for _ in range(30):
            pool = [
                prospect(
                    f"w{i}",
                    rng.uniform(0, 2.0 / ACCEPTANCE_WINDOW_SECONDS),
                    rng.uniform(0.5, 1.0),
                    rng.uniform(1.0, 20.0),
                )
                for i in range(rng.randint(1, 12))
            ]
            need = rng.uniform(0.2, 3.0)
            invited = worker_notify(pool, expected_acceptances=need)
            covered = sum(acceptance_probability(p.availability) for p in invited)
            if len(invited) < len(pool):
                assert covered >= need
            if invited:
                without_last = covered - acceptance_probability(
                    invited[-1].availability
                )
                assert without_last < need

    def test_need_must_be_positive(self):
        with pytest.raises(ValueError):
            worker_notify([], expected_acceptances=0.0)
