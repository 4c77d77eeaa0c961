"""
Tests for the instance generators.
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from asymcc.exceptions import GraphSamplingError, ModelParameterError
from asymcc.generators import (
    GapParams,
    PlantedParams,
    gap_instance,
    gap_ratio,
    planted_instance,
    random_instance,
    suggested_gap_n,
    two_weight_instance,
)
from asymcc.model import EdgeSign, GraphMode, validate_instance
from asymcc.relaxation import check_metric_feasibility


class TestPlanted:
    def test_log_likelihood_weights(self):
        params = PlantedParams(sizes=[5, 5], p_plus=0.3, q_minus=0.9, seed=7)
        w_plus, w_minus = params.weights
        assert w_plus == pytest.approx(math.log(3.0))
        assert w_minus == pytest.approx(math.log(9.0 / 7.0))

    def test_instance_is_valid(self):
        params = PlantedParams(sizes=[5, 5], p_plus=0.3, q_minus=0.9, seed=7)
        inst, truth = planted_instance(params)
        assert inst.n == 10
        assert inst.num_pairs == 45
        assert inst.w_scale == pytest.approx(math.log(3.0))
        assert inst.alpha == pytest.approx(math.log(9.0 / 7.0) / math.log(3.0))
        assert validate_instance(inst).valid
        assert truth.clusters() == [[0, 1, 2, 3, 4], [5, 6, 7, 8, 9]]

    def test_seed_reproducible(self):
        params = PlantedParams(sizes=[3, 4], p_plus=0.8, q_minus=0.7, seed=1)
        first, _ = planted_instance(params)
        second, _ = planted_instance(params)
        assert np.array_equal(first.signs, second.signs)

    def test_no_signal_rejected(self):
        with pytest.raises(ModelParameterError):
            PlantedParams(sizes=[4], p_plus=0.3, q_minus=0.6)

    def test_probability_range(self):
        with pytest.raises(ValidationError):
            PlantedParams(sizes=[4], p_plus=1.0, q_minus=0.6)


class TestGap:
    @pytest.mark.parametrize("alpha, n", [(0.1, 20), (0.5, 10)])
    def test_suggested_size(self, alpha, n):
        assert suggested_gap_n(alpha) == n

    def test_suggested_size_range(self):
        with pytest.raises(ModelParameterError):
            suggested_gap_n(0.7)

    def test_smallest_graph_is_k4(self):
        inst, solution = gap_instance(GapParams(n=4, alpha=0.5, seed=0))
        assert np.all(inst.signs == EdgeSign.POSITIVE)
        off_diagonal = solution.x[~np.eye(4, dtype=bool)]
        assert np.all(off_diagonal == 1.0)

    def test_instance_structure(self):
        inst, solution = gap_instance(GapParams(n=20, alpha=0.1, seed=3))
        positive = inst.signs == EdgeSign.POSITIVE
        assert positive.sum() == 30
        assert np.all(inst.weights[positive] == 1.0)
        assert np.all(inst.weights[~positive] == 0.1)
        assert validate_instance(inst).valid
        report = check_metric_feasibility(solution.x)
        assert report.max_violation <= 1e-12

    def test_bipartite_variant(self):
        inst, solution = gap_instance(GapParams(n=8, alpha=0.2, bipartite=True, seed=2))
        assert inst.mode == GraphMode.BIPARTITE
        assert inst.left_size == 4
        assert (inst.signs == EdgeSign.POSITIVE).sum() == 12
        assert (inst.signs == EdgeSign.MISSING).sum() == 12

    def test_seed_reproducible(self):
        first, _ = gap_instance(GapParams(n=12, alpha=0.3, seed=5))
        second, _ = gap_instance(GapParams(n=12, alpha=0.3, seed=5))
        assert np.array_equal(first.signs, second.signs)

    def test_odd_size_rejected(self):
        with pytest.raises(ModelParameterError):
            GapParams(n=7, alpha=0.1)

    def test_small_bipartite_rejected(self):
        with pytest.raises(ModelParameterError):
            GapParams(n=4, alpha=0.1, bipartite=True)

    def test_too_small_rejected(self):
        with pytest.raises(ValidationError):
            GapParams(n=2, alpha=0.1)

    def test_retry_cap(self, monkeypatch, mocker):
        monkeypatch.setenv("CC_GAP_RETRY_CAP", "3")
        mocker.patch("asymcc.generators.nx.is_connected", return_value=False)
        with pytest.raises(GraphSamplingError):
            gap_instance(GapParams(n=10, alpha=0.2, seed=0))

    def test_gap_ratio_report(self):
        inst, solution = gap_instance(GapParams(n=20, alpha=0.1, seed=3))
        report = gap_ratio(inst, solution, trials=5, seed=1)
        assert report.fractional == pytest.approx(solution.objective)
        assert report.best_integral > 0
        assert report.ratio == pytest.approx(report.best_integral / report.fractional)

    @pytest.mark.slow
    def test_large_gap_instance(self):
        inst, solution = gap_instance(GapParams(n=2000, alpha=0.01, seed=0))
        assert (inst.signs == EdgeSign.POSITIVE).sum() == 3000
        assert check_metric_feasibility(solution.x).max_violation <= 1e-12
        report = gap_ratio(inst, solution, trials=20, seed=0)
        assert report.fractional <= report.positive_bound + report.negative_bound
        assert report.fractional == pytest.approx(solution.objective)
        assert report.ratio > 1.0


class TestRandomInstances:
    def test_random_instance_respects_bands(self):
        inst = random_instance(9, 0.2, 0.4, seed=8)
        assert validate_instance(inst).valid
        assert inst.mode == GraphMode.COMPLETE

    def test_random_instance_arguments(self):
        with pytest.raises(ModelParameterError):
            random_instance(1, 0.2, 0.4, seed=0)
        with pytest.raises(ModelParameterError):
            random_instance(5, 0.2, 1.4, seed=0)

    def test_two_weight_regime(self):
        inst = two_weight_instance(6, 2.0, 1.0, 0.5, seed=4)
        assert inst.alpha == 0.5
        assert inst.w_scale == 2.0
        assert validate_instance(inst).valid

    def test_two_weight_heavy_negatives(self):
        inst = two_weight_instance(6, 1.0, 3.0, 0.5, seed=4)
        assert inst.alpha == 1.0
        assert validate_instance(inst).valid
