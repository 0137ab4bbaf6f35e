"""
flexsim Configuration

Environment-aware process settings for simulation runs and studies.
"""

import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .errors import ConfigError


LOG_FORMATS = ("text", "json")


def _env_int(name: str, default: int, minimum: int = 1) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}", field=name)
    if value < minimum:
        raise ConfigError(f"must be >= {minimum}, got {value}", field=name)
    return value


@dataclass(frozen=True)
class Settings:
    """
    Process-level settings.

    Loads from environment variables with sensible defaults.
    """
    # Logging
    log_level: str = "INFO"
    log_format: str = "text"

    # Execution
    threads: int = 1
    max_queue: int = 1_000_000  # instability flag threshold
    trace_dir: Optional[str] = None

    @classmethod
    def from_env(cls) -> "Settings":
        """Load settings from environment variables."""
        log_format = os.getenv("FLEXSIM_LOG_FORMAT", "text").lower()
        if log_format not in LOG_FORMATS:
            raise ConfigError(
                f"expected one of {LOG_FORMATS}, got {log_format!r}",
                field="FLEXSIM_LOG_FORMAT",
            )

        return cls(
            log_level=os.getenv("FLEXSIM_LOG_LEVEL", "INFO").upper(),
            log_format=log_format,
            threads=_env_int("FLEXSIM_THREADS", os.cpu_count() or 1),
            max_queue=_env_int("FLEXSIM_MAX_QUEUE", 1_000_000),
            trace_dir=os.getenv("FLEXSIM_TRACE_DIR") or None,
        )


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings.from_env()
