"""
Tests for rounding functions, pivot rounding and the expectation tools.
"""

import json
import math

import numpy as np
import pytest

from asymcc.exceptions import DimensionError, ModelParameterError, SizeLimitError
from asymcc.generators import random_instance
from asymcc.model import Clustering, GraphMode, disagreement_cost
from asymcc.relaxation import lp_objective, solve_metric_lp
from asymcc.rounding import (
    RoundingFunction,
    RoundingVariant,
    approximation_factor,
    exact_expected_cost,
    expected_step_cost,
    make_f,
    pivot_round,
    rounding_trials,
    simulate_step,
    trial_seeds,
    two_weight_factor,
    weight_blind_pivot,
)


class TestFactors:
    def test_complete_factor(self):
        assert approximation_factor(0.01) == pytest.approx(12.2103, abs=1e-4)
        assert approximation_factor(0.001) == pytest.approx(16.8155, abs=1e-3)
        assert approximation_factor(1.0) == 3.0

    def test_bipartite_factor(self):
        assert approximation_factor(1.0, GraphMode.BIPARTITE) == 5.0

    @pytest.mark.parametrize("alpha", [0.0, 1.01])
    def test_alpha_range(self, alpha):
        with pytest.raises(ModelParameterError):
            approximation_factor(alpha)

    def test_two_weight_factor(self):
        assert two_weight_factor(1.0, 2.0) == 3.0
        assert two_weight_factor(2.0, 1.0) == pytest.approx(3.0 + 2.0 * math.log(2.0))


class TestRoundingFunction:
    def test_small_alpha_exponential(self):
        f = make_f(0.01)
        assert f.variant == RoundingVariant.SMALL_ALPHA
        assert f(0.1) == pytest.approx(0.70508, abs=1e-4)
        assert f.tau == pytest.approx(0.45905, abs=1e-5)
        assert f(f.tau) == 1.0
        assert f(0.0) == 0.0

    def test_large_alpha_steps(self):
        f = make_f(0.5)
        assert f.variant == RoundingVariant.LARGE_ALPHA
        assert 1.0 / f.A == pytest.approx(0.22798, abs=1e-5)
        assert f(0.2) == 0.0
        assert f(0.25) == pytest.approx(1.0 / 6.0)
        assert f(0.4) == 1.0
        assert f.breakpoints() == (1.0 / f.A, f.tau)
        assert f.left_limit(1.0 / f.A) == 0.0

    def test_threshold_is_inclusive(self):
        assert make_f(0.169).variant == RoundingVariant.SMALL_ALPHA
        assert make_f(0.1691).variant == RoundingVariant.LARGE_ALPHA

    def test_bipartite_variant(self):
        f = make_f(0.5, GraphMode.BIPARTITE)
        assert f.variant == RoundingVariant.BIPARTITE
        assert f.A == pytest.approx(5.0 + 2.0 * math.log(2.0))

    def test_random_alphas(self, four_vertex_lengths):
        rng = np.random.default_rng(2024)
        xs = np.linspace(0.0, 1.0, 10_000)
        for alpha in 1.0 - rng.random(50):
            f = make_f(alpha)
            ys = f(xs)
            assert f(0.0) == 0.0
            assert np.all(np.diff(ys) >= 0)
            assert np.all(ys[xs >= f.tau + 1e-12] == 1.0)
            seed = int(rng.integers(1 << 31))
            first, _ = pivot_round(four_vertex_lengths, f, seed)
            again, _ = pivot_round(four_vertex_lengths, f, seed)
            assert np.array_equal(first.labels, again.labels)

    def test_vectorized_and_monotone(self):
        for alpha in (0.01, 0.3, 1.0):
            ys = make_f(alpha)(np.linspace(0.0, 1.0, 201))
            assert ys[0] == 0.0
            assert ys[-1] == 1.0
            assert np.all(np.diff(ys) >= 0)

    def test_tabulated_lookup(self):
        f = RoundingFunction.tabulated(0.1, 5.0, [0.0, 0.1, 0.2, 0.45], [0.0, 0.3, 0.6, 0.9])
        assert f.tau == pytest.approx(0.4)
        # rows at or past tau are dropped
        assert f.table_x.tolist() == [0.0, 0.1, 0.2]
        assert f(0.05) == 0.0
        assert f(0.15) == pytest.approx(0.3)
        assert f(0.39) == pytest.approx(0.6)
        assert f(0.4) == 1.0
        assert f.breakpoints() == (0.1, 0.2, f.tau)
        assert f.left_limit(0.2) == pytest.approx(0.3)

    def test_flat_table_rows_are_not_breakpoints(self):
        f = RoundingFunction.tabulated(0.5, 4.0, [0.0, 0.1, 0.2, 0.3], [0.0, 0.0, 0.4, 0.4])
        assert f.breakpoints() == (0.2, f.tau)

    @pytest.mark.parametrize(
        "xs, ys",
        [
            ([0.1, 0.2], [0.0, 0.5]),
            ([0.0, 0.2], [0.1, 0.5]),
            ([0.0, 0.2, 0.1], [0.0, 0.1, 0.2]),
            ([0.0, 0.1, 0.2], [0.0, 0.5, 0.4]),
            ([0.0, 0.1], [0.0, 1.5]),
        ],
    )
    def test_bad_tables(self, xs, ys):
        with pytest.raises(ModelParameterError):
            RoundingFunction.tabulated(0.1, 5.0, xs, ys)

    def test_factor_below_three_rejected(self):
        with pytest.raises(ModelParameterError):
            RoundingFunction(variant=RoundingVariant.SMALL_ALPHA, alpha=0.5, A=2.5)


class TestPivotRound:
    def test_same_seed_same_partition(self, four_vertex_lengths):
        f = make_f(0.01)
        first, trace_a = pivot_round(four_vertex_lengths, f, seed=11)
        second, trace_b = pivot_round(four_vertex_lengths, f, seed=11)
        assert np.array_equal(first.labels, second.labels)
        assert trace_a.to_jsonl() == trace_b.to_jsonl()

    def test_trace_covers_every_vertex_once(self, four_vertex_lengths):
        clustering, trace = pivot_round(four_vertex_lengths, make_f(0.3), seed=5)
        members = [v for step in trace.steps for v in step.cluster_members]
        assert sorted(members) == [0, 1, 2, 3]
        for step in trace.steps:
            assert step.pivot in step.cluster_members
            assert 0.0 <= step.R < 1.0
            assert set(clustering.labels[step.cluster_members]) == {step.step}

    def test_trace_jsonl(self, four_vertex_lengths):
        _, trace = pivot_round(four_vertex_lengths, make_f(0.3), seed=2)
        lines = trace.to_jsonl().splitlines()
        assert len(lines) == len(trace)
        assert set(json.loads(lines[0])) == {"step", "pivot", "R", "cluster_members"}

    def test_zero_lengths_form_one_cluster(self):
        clustering, trace = pivot_round(np.zeros((5, 5)), make_f(0.2), seed=0)
        assert len(trace) == 1
        assert clustering.same_partition(Clustering.single_cluster(5))

    def test_unit_lengths_give_singletons(self):
        x = np.ones((4, 4)) - np.eye(4)
        clustering, _ = pivot_round(x, make_f(0.2), seed=0)
        assert clustering.same_partition(Clustering.singletons(4))

    def test_non_square_rejected(self):
        with pytest.raises(DimensionError):
            pivot_round(np.zeros((2, 3)), make_f(0.2), seed=0)


class TestTrials:
    def test_seeds_are_reproducible(self):
        assert trial_seeds(42, 5) == trial_seeds(42, 5)
        assert len(set(trial_seeds(42, 50))) == 50

    def test_results_independent_of_threads(self, four_vertex, four_vertex_lengths):
        f = make_f(four_vertex.alpha)
        one = rounding_trials(four_vertex, four_vertex_lengths, f, 20, seed=3, threads=1)
        many = rounding_trials(four_vertex, four_vertex_lengths, f, 20, seed=3, threads=4)
        assert [r.cost for r in one] == [r.cost for r in many]

    def test_needs_a_trial(self, four_vertex, four_vertex_lengths):
        with pytest.raises(ModelParameterError):
            rounding_trials(four_vertex, four_vertex_lengths, make_f(0.01), 0, seed=1)

    def test_best_trial_bounded_by_lp(self, triangle):
        solution = solve_metric_lp(triangle)
        results = rounding_trials(triangle, solution, make_f(1.0), 50, seed=1)
        best = min(r.cost for r in results)
        assert solution.objective - 1e-6 <= best <= 3.0 * solution.objective + 1e-6

    def test_weight_blind_pivot_uses_signs_only(self, triangle):
        clustering = weight_blind_pivot(triangle, seed=4)
        assert clustering.n == 3
        # each of the three pivots leaves exactly one pair in disagreement
        assert disagreement_cost(triangle, clustering) == 1.0


class TestExpectations:
    def test_step_expectation_matches_simulation(self, four_vertex, four_vertex_lengths):
        f = make_f(four_vertex.alpha)
        sim = simulate_step(four_vertex, four_vertex_lengths, f, range(4), samples=100_000, seed=9)
        assert abs(sim.alg_mean - sim.expected_alg) <= 5 * sim.alg_se + 1e-9
        assert abs(sim.lp_mean - sim.expected_lp) <= 5 * sim.lp_se + 1e-9

    def test_step_on_single_vertex(self, four_vertex, four_vertex_lengths):
        f = make_f(four_vertex.alpha)
        assert expected_step_cost(four_vertex, four_vertex_lengths, f, [2]) == (0.0, 0.0)

    def test_empty_active_set_rejected(self, four_vertex, four_vertex_lengths):
        with pytest.raises(ModelParameterError):
            expected_step_cost(four_vertex, four_vertex_lengths, make_f(0.01), [])

    def test_exact_expectation_deterministic_cases(self, four_vertex):
        f = make_f(four_vertex.alpha)
        together = exact_expected_cost(four_vertex, np.zeros((4, 4)), f)
        apart = exact_expected_cost(four_vertex, np.ones((4, 4)) - np.eye(4), f)
        assert together == pytest.approx(disagreement_cost(four_vertex, Clustering.single_cluster(4)))
        assert apart == pytest.approx(disagreement_cost(four_vertex, Clustering.singletons(4)))

    def test_exact_expectation_matches_sampling(self, four_vertex, four_vertex_lengths):
        f = make_f(four_vertex.alpha)
        exact = exact_expected_cost(four_vertex, four_vertex_lengths, f)
        costs = np.array(
            [
                disagreement_cost(four_vertex, pivot_round(four_vertex_lengths, f, s)[0])
                for s in trial_seeds(0, 4000)
            ]
        )
        se = costs.std(ddof=1) / math.sqrt(costs.size)
        assert abs(costs.mean() - exact) <= 5 * se

    def test_expected_cost_within_factor_of_lp(self, four_vertex, four_vertex_lengths):
        f = make_f(four_vertex.alpha)
        expected = exact_expected_cost(four_vertex, four_vertex_lengths, f)
        assert expected <= f.A * lp_objective(four_vertex, four_vertex_lengths) + 1e-9

    @pytest.mark.parametrize("alpha", [0.05, 0.5])
    def test_step_charging_on_random_states(self, alpha):
        rng = np.random.default_rng(31)
        f = make_f(alpha)
        for seed in range(50):
            inst = random_instance(7, alpha, 0.5, seed)
            x = solve_metric_lp(inst).x
            active = np.sort(rng.choice(7, size=int(rng.integers(2, 8)), replace=False))
            e_alg, e_lp = expected_step_cost(inst, x, f, active.tolist())
            assert e_alg <= approximation_factor(alpha) * e_lp + 1e-9

    @pytest.mark.slow
    @pytest.mark.parametrize("alpha", [0.05, 0.5])
    def test_step_simulation_on_random_states(self, alpha):
        rng = np.random.default_rng(37)
        f = make_f(alpha)
        for seed in range(50):
            inst = random_instance(7, alpha, 0.5, seed)
            x = solve_metric_lp(inst).x
            active = np.sort(rng.choice(7, size=int(rng.integers(2, 8)), replace=False))
            sim = simulate_step(inst, x, f, active.tolist(), samples=100_000, seed=seed)
            assert abs(sim.alg_mean - sim.expected_alg) <= 4 * sim.alg_se + 1e-9
            assert abs(sim.lp_mean - sim.expected_lp) <= 4 * sim.lp_se + 1e-9

    def test_exact_expectation_size_limit(self):
        with pytest.raises(SizeLimitError):
            exact_expected_cost(
                random_instance(13, 0.5, 0.5, 0),
                np.zeros((13, 13)),
                make_f(0.5),
            )
