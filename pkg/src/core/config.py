"""
Application Configuration

Environment-level settings for the toolkit using Pydantic settings.
Supports environment variables (prefix ``WEAKTRAJ_``) and .env files.
Run configurations (slit geometry, z schedule, sensor, mode) are JSON
documents validated by the models in ``src.models.config``.
"""

from functools import lru_cache
from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Toolkit settings"""

    model_config = SettingsConfigDict(
        env_prefix="WEAKTRAJ_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # Application
    APP_ENV: str = Field(default="development", pattern="^(development|testing|production)$")

    # Output directory override (WEAKTRAJ_OUT)
    OUT: Optional[str] = None

    # Execution
    DEFAULT_JOBS: int = Field(default=1, ge=1)
    PROGRESS: bool = False

    # Artifacts
    FLOAT_FORMAT: str = "%.17g"
    MANIFEST_NAME: str = "manifest.json"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = Field(default="console", pattern="^(json|console)$")

    @field_validator("LOG_LEVEL", mode="before")
    @classmethod
    def normalize_log_level(cls, v):
        """Accept lower-case level names"""
        if isinstance(v, str):
            return v.strip().upper()
        return v


@lru_cache()
def get_settings() -> Settings:
    """
    Get cached settings instance.

    Uses LRU cache to avoid re-reading environment variables; tests that
    change the environment call ``get_settings.cache_clear()``.
    """
    return Settings()
