"""
Shared fixtures.
"""

from pathlib import Path

import numpy as np
import pytest
from typer.testing import CliRunner

from asymcc.config import get_settings
from asymcc.io import write_instance
from asymcc.model import EdgeSign, Instance

P, N = EdgeSign.POSITIVE, EdgeSign.NEGATIVE


@pytest.fixture(autouse=True)
def _fresh_settings(monkeypatch):
    """Settings are cached; drop the cache so env tweaks in a test take effect."""
    monkeypatch.setenv("CC_THREADS", "2")
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def triangle() -> Instance:
    """Pairs (0,1) and (0,2) positive, (1,2) negative, all weight 1."""
    return Instance(n=3, signs=np.array([P, P, N]), weights=np.ones(3), alpha=1.0)


@pytest.fixture
def four_vertex() -> Instance:
    # pair order: 01 02 03 12 13 23
    return Instance(
        n=4,
        signs=np.array([P, P, N, N, P, P]),
        weights=np.array([1.0, 0.5, 2.0, 0.3, 0.8, 1.0]),
        alpha=0.01,
    )


@pytest.fixture
def four_vertex_lengths() -> np.ndarray:
    return np.array(
        [
            [0.0, 0.1, 0.2, 0.3],
            [0.1, 0.0, 0.15, 0.25],
            [0.2, 0.15, 0.0, 0.12],
            [0.3, 0.25, 0.12, 0.0],
        ]
    )


@pytest.fixture
def triangle_file(tmp_path: Path, triangle: Instance) -> Path:
    path = tmp_path / "triangle.cc"
    write_instance(triangle, path)
    return path


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()
