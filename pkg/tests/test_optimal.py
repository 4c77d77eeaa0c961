"""
Tests for the table LP and the search for the optimal factor.
"""

import numpy as np
import pytest

from asymcc.exceptions import ModelParameterError, OptimalFError
from asymcc.optimal import BRACKET_WIDENINGS, a_opt_table, compute_a_opt, feasibility_lp
from asymcc.rounding import RoundingVariant, approximation_factor
from asymcc.triples import certify_grid


class TestFeasibilityLp:
    def test_classical_factor_needs_no_rounding_mass(self):
        f = feasibility_lp(1.0, 3.0, 0.02)
        assert f is not None
        assert f.variant == RoundingVariant.TABULATED
        assert np.allclose(f.table_y, 0.0, atol=1e-7)

    def test_feasible_table_is_a_rounding_function(self):
        f = feasibility_lp(0.1, 5.5, 0.02)
        assert f is not None
        assert f.table_y[0] == 0.0
        assert np.all(np.diff(f.table_y) >= 0)
        assert f.table_x[-1] < f.tau
        assert f(f.tau) == 1.0

    def test_table_passes_its_own_certification(self):
        f = feasibility_lp(0.2, 5.5, 0.02)
        assert f is not None
        report = certify_grid(0.2, f, 5.5, step=0.02, eps_cert=1e-6, refine=False)
        assert report.passed

    @pytest.mark.slow
    def test_feasibility_brackets_optimal_factor(self):
        assert feasibility_lp(0.1, 4.0, 0.005) is None
        assert feasibility_lp(0.1, 5.0, 0.005) is not None

    @pytest.mark.parametrize("A, h", [(2.9, 0.02), (4.0, 0.0), (4.0, 0.1)])
    def test_parameter_ranges(self, A, h):
        with pytest.raises(ModelParameterError):
            feasibility_lp(0.5, A, h)


class TestComputeAOpt:
    def test_alpha_one_is_classical(self):
        result = compute_a_opt(1.0, h=0.02, tol=0.01)
        assert result.A_opt == 3.0
        assert result.lp_solves == 1
        assert result.certified
        summary = result.summary()
        assert summary.A_thm == 3.0
        assert summary.h == 0.02

    def test_result_inside_bracket(self):
        result = compute_a_opt(0.5, h=0.02, tol=0.05)
        assert 3.0 <= result.A_opt <= approximation_factor(0.5)
        assert result.f.A == result.A_opt

    def test_tolerance_floor(self):
        with pytest.raises(ModelParameterError):
            compute_a_opt(0.5, h=0.02, tol=1e-5)

    def test_bracket_widening_gives_up(self, mocker):
        search = mocker.patch("asymcc.optimal.feasibility_lp", return_value=None)
        with pytest.raises(OptimalFError):
            compute_a_opt(0.5, h=0.02, tol=0.01)
        assert search.call_count == 2 + BRACKET_WIDENINGS

    def test_table_of_alphas(self):
        rows = a_opt_table([1.0], h=0.02, tol=0.01)
        assert len(rows) == 1
        assert rows[0].A_opt == 3.0
        assert rows[0].certified

    @pytest.mark.slow
    def test_optimal_factor_beats_closed_form(self):
        result = compute_a_opt(0.1, h=0.005)
        assert result.A_opt < result.A_thm
        assert result.certified

    @pytest.mark.slow
    def test_factor_table(self):
        rows = a_opt_table([0.01, 0.1, 0.5, 1.0])
        for row in rows:
            assert 3.0 <= row.A_opt <= row.A_thm
        assert rows[-1].A_opt == 3.0
        factors = [row.A_opt for row in rows]
        assert all(a >= b for a, b in zip(factors, factors[1:]))

    @pytest.mark.slow
    def test_alpha_one_at_full_resolution(self):
        result = compute_a_opt(1.0, h=0.005, tol=1e-3)
        assert 3.0 <= result.A_opt <= 3.05

    @pytest.mark.slow
    @pytest.mark.parametrize("alpha, expected", [(0.2, 4.32), (0.1, 4.63), (0.01, 6.78)])
    def test_optimal_factors(self, alpha, expected):
        result = compute_a_opt(alpha, h=0.005, tol=1e-3)
        assert result.A_opt == pytest.approx(expected, abs=0.2)
        assert result.A_opt <= result.A_thm
        assert result.certified
