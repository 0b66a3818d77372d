"""
Configuration settings module for the toolkit.
"""

import os

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Determine the environment, default to 'development'
APP_ENV = os.getenv("PEERINF_ENVIRONMENT", "development")


class Settings(BaseSettings):
    """Runtime settings loaded from ``PEERINF_``-prefixed environment variables."""

    # App settings
    PROJECT_NAME: str = "Peer Influence Under Latent Homophily"
    VERSION: str = "0.1.0"
    ENVIRONMENT: str = APP_ENV

    # Logging
    LOG_LEVEL: str = "INFO"
    JSON_LOGS: bool = False
    LOG_TO_FILE: bool = False
    LOG_FILE_PATH: str = "logs/peerinf.log"

    # Execution
    MAX_WORKERS: int | None = None  # hard cap on replication workers
    FAILURE_TOLERANCE: float = 0.10  # failed-replication share that makes a run exit 2

    # Numerics
    OVERFLOW_GUARD: float = 1e12
    MIN_STRATUM_COUNT: int = 30
    CI_LEVEL: float = 0.95

    # Monitoring
    ENABLE_METRICS: bool = True

    @field_validator("ENVIRONMENT")
    @classmethod
    def validate_environment(cls, v: str) -> str:
        """Validate environment is valid."""
        allowed = {"development", "testing", "production"}
        if v not in allowed:
            raise ValueError(f"ENVIRONMENT must be one of {allowed}, got '{v}'")
        return v

    @field_validator("MAX_WORKERS")
    @classmethod
    def validate_max_workers(cls, v: int | None) -> int | None:
        if v is not None and v < 1:
            raise ValueError("MAX_WORKERS must be at least 1")
        return v

    @field_validator("CI_LEVEL")
    @classmethod
    def validate_ci_level(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("CI_LEVEL must lie in (0, 1)")
        return v

    model_config = SettingsConfigDict(
        env_prefix="PEERINF_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )


# Global settings instance
settings = Settings()
