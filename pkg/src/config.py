"""Process settings loaded from environment variables and .env file.

Experiment hyperparameters live in `src.models.run_config`; this module only
covers knobs that belong to the process (logging, parallelism, guards).
"""

import os
from dataclasses import dataclass

from dotenv import load_dotenv

# Load .env file at module import time
load_dotenv()


@dataclass
class Settings:
    """Process settings loaded from environment variables and .env file.

    Attributes:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL).
        threads: Upper bound on worker threads (evaluation levels, ablation cells).
        check_finite: Raise on NaN/Inf at every autodiff op boundary.
        run_log_enabled: Emit JSON-lines run events on stderr.
    """

    # Logging
    log_level: str

    # Parallelism
    threads: int

    # Numerics
    check_finite: bool

    # Run events
    run_log_enabled: bool

    def worker_count(self, jobs: int) -> int:
        """Number of workers to use for `jobs` independent units of work.

        Args:
            jobs: Number of independent jobs available.

        Returns:
            Worker count in [1, threads].
        """
        return max(1, min(self.threads, jobs))


def _str_to_bool(value: str) -> bool:
    """Convert string to boolean (case-insensitive).

    Args:
        value: String value to convert ("true", "1", "yes", "on" are truthy).

    Returns:
        Boolean representation of the string value.
    """
    return value.lower() in ("true", "1", "yes", "on")


def load_settings() -> Settings:
    """Load settings from environment variables with defaults.

    Returns:
        Settings instance with all configuration loaded.
    """
    return Settings(
        log_level=os.getenv("LOG_LEVEL", "INFO"),
        threads=max(1, int(os.getenv("MIRGAN_THREADS", "1"))),
        check_finite=_str_to_bool(os.getenv("MIRGAN_CHECK_FINITE", "true")),
        run_log_enabled=_str_to_bool(os.getenv("MIRGAN_RUN_LOG", "true")),
    )


# Global settings instance
settings = load_settings()
