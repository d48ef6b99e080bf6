"""Configuration management for the trace simplification toolkit."""

from pathlib import Path
from typing import List

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

PACKAGE_CONFIG_DIR = Path(__file__).parent / "config"


class Settings(BaseSettings):
    """Application settings."""

    model_config = SettingsConfigDict(
        env_prefix="TRACESIMP_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # Application Configuration
    log_level: str = Field(default="INFO")

    # Contracts and bench grid shipped with the package
    contract_path: str = Field(default=str(PACKAGE_CONFIG_DIR / "library.contract"))
    bench_grid_path: str = Field(default=str(PACKAGE_CONFIG_DIR / "bench_grid.yaml"))

    # Simplification
    strategy: str = Field(default="foreach")
    replays_per_candidate: int = Field(default=1, ge=1)
    seed: int = Field(default=0)

    # Replay harness
    max_events: int = Field(default=100_000, gt=0)
    timestamp_tick_us: int = Field(default=1, gt=0)
    default_mocked: List[str] = Field(default=["user", "<0.23.0>"])

    # Bench
    bench_jobs: int = Field(default=1, ge=1)

    # Output formats
    stats_format_version: int = 1


# Global settings instance
settings = Settings()
