"""
Configuration Management

Centralized configuration using Pydantic Settings.
"""

from functools import lru_cache
from typing import List, Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


def parse_alpha_list(text: str) -> List[float]:
    """Parse a comma-separated alpha list."""
    return [float(a.strip()) for a in text.split(",") if a.strip()]


class Settings(BaseSettings):
    """Toolkit settings."""

    model_config = SettingsConfigDict(
        env_file=".env.local",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # Runtime
    CC_THREADS: Optional[int] = Field(default=None, ge=1)
    CC_LOG_LEVEL: str = Field(default="INFO")
    CC_LOG_JSON: bool = Field(default=False)

    # LP relaxation
    CC_TAU_FEAS: float = Field(default=1e-7, gt=0.0)
    CC_TAU_OPT: float = Field(default=1e-6, gt=0.0)
    CC_MAX_SEPARATION_ROUNDS: int = Field(default=200, ge=1)
    CC_SEPARATION_FACTOR: int = Field(default=5, ge=1)

    # Certification
    CC_EPS_CERT: float = Field(default=1e-9, gt=0.0)
    CC_GRID_STEP: float = Field(default=0.005, gt=0.0, le=0.1)

    # Optimal rounding function
    CC_OPTF_STEP: float = Field(default=0.005, gt=0.0, le=0.05)
    CC_OPTF_TOL: float = Field(default=1e-3, ge=1e-4)

    # Oracles and generators
    CC_EXACT_CAP: int = Field(default=13, ge=1)
    CC_GAP_RETRY_CAP: int = Field(default=1000, ge=1)
    CC_TRIALS: int = Field(default=50, ge=1)
    CC_BENCH_ALPHAS: str = Field(default="0.01,0.1,0.5,1.0")

    @field_validator("CC_BENCH_ALPHAS")
    @classmethod
    def check_alphas(cls, v: str) -> str:
        for a in parse_alpha_list(v):
            if not 0.0 < a <= 1.0:
                raise ValueError(f"alpha {a} outside (0, 1]")
        return v

    @property
    def bench_alphas(self) -> List[float]:
        return parse_alpha_list(self.CC_BENCH_ALPHAS)

    @field_validator("CC_LOG_LEVEL")
    @classmethod
    def normalize_level(cls, v: str) -> str:
        return v.upper()


@lru_cache()
def get_settings() -> Settings:
    """
    Get cached settings instance.

    Returns:
        Settings instance
    """
    return Settings()
