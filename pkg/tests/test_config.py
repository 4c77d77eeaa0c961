"""
Tests for environment-driven settings and the worker pool helpers.
"""

import pytest
from pydantic import ValidationError

from asymcc.config import Settings, get_settings, parse_alpha_list
from asymcc.exceptions import AsymCCError, InstanceFormatError, SolverError
from asymcc.parallel import resolve_threads, thread_map
from asymcc.relaxation import SolveMode, SolverStats


pytestmark = pytest.mark.unit


class TestSettings:
    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("CC_THREADS", raising=False)
        settings = Settings()
        assert settings.CC_TAU_FEAS == 1e-7
        assert settings.CC_EPS_CERT == 1e-9
        assert settings.CC_GRID_STEP == 0.005
        assert settings.CC_EXACT_CAP == 13
        assert settings.bench_alphas == [0.01, 0.1, 0.5, 1.0]

    def test_environment_overrides(self, monkeypatch):
        monkeypatch.setenv("CC_TRIALS", "7")
        monkeypatch.setenv("CC_LOG_LEVEL", "debug")
        monkeypatch.setenv("CC_BENCH_ALPHAS", "0.2, 0.4")
        settings = get_settings()
        assert settings.CC_TRIALS == 7
        assert settings.CC_LOG_LEVEL == "DEBUG"
        assert settings.bench_alphas == [0.2, 0.4]

    def test_settings_are_cached(self):
        assert get_settings() is get_settings()

    @pytest.mark.parametrize(
        "name, value",
        [("CC_BENCH_ALPHAS", "0.1,2"), ("CC_GRID_STEP", "0.5"), ("CC_OPTF_TOL", "1e-6")],
    )
    def test_invalid_values(self, monkeypatch, name, value):
        monkeypatch.setenv(name, value)
        with pytest.raises(ValidationError):
            Settings()

    def test_parse_alpha_list(self):
        assert parse_alpha_list(" 0.5,,1 ") == [0.5, 1.0]


class TestParallel:
    def test_flag_wins(self):
        assert resolve_threads(5) == 5

    def test_environment_fallback(self):
        assert resolve_threads() == 2

    def test_order_preserved(self):
        assert thread_map(lambda v: v * v, range(10), threads=4) == [v * v for v in range(10)]


class TestErrorEnvelope:
    def test_envelope_shape(self):
        error = InstanceFormatError("bad sign", line=4, token="*")
        payload = error.to_dict()["error"]
        assert payload["code"] == 3
        assert payload["type"] == "format_error"
        assert payload["message"] == "line 4: bad sign"
        assert payload["context"] == {"line": 4, "token": "*"}

    def test_base_error_without_context(self):
        assert AsymCCError("boom").to_dict() == {
            "error": {"code": 1, "message": "boom", "type": "internal_error"}
        }

    def test_solver_error_carries_stats(self):
        stats = SolverStats(mode=SolveMode.LAZY, separation_rounds=4)
        payload = SolverError("stalled", stats=stats).to_dict()["error"]
        assert payload["code"] == 1
        assert payload["stats"]["separation_rounds"] == 4
