"""Unit tests for configuration module."""

import os
from unittest.mock import patch

from src.config import Settings, _str_to_bool, load_settings


class TestStrToBool:
    """Tests for _str_to_bool helper function."""

    def test_true_values(self) -> None:
        """Test that various true-like strings are converted correctly."""
        for value in ("true", "TRUE", "True", "1", "yes", "YES", "on", "ON"):
            assert _str_to_bool(value) is True

    def test_false_values(self) -> None:
        """Test that non-true strings are converted to False."""
        for value in ("false", "FALSE", "0", "no", "off", "", "random"):
            assert _str_to_bool(value) is False


class TestLoadSettings:
    """Tests for load_settings function."""

    def test_load_settings_defaults(self) -> None:
        """Test that load_settings returns correct defaults."""
        with patch.dict(os.environ, {}, clear=True):
            settings = load_settings()
            assert settings.log_level == "INFO"
            assert settings.threads == 1
            assert settings.check_finite is True
            assert settings.run_log_enabled is True

    def test_load_settings_from_env(self) -> None:
        """Test that load_settings reads from environment variables."""
        env_vars = {
            "LOG_LEVEL": "DEBUG",
            "MIRGAN_THREADS": "4",
            "MIRGAN_CHECK_FINITE": "false",
            "MIRGAN_RUN_LOG": "off",
        }

        with patch.dict(os.environ, env_vars, clear=True):
            settings = load_settings()
            assert settings.log_level == "DEBUG"
            assert settings.threads == 4
            assert settings.check_finite is False
            assert settings.run_log_enabled is False

    def test_threads_floor_at_one(self) -> None:
        """Test that a zero thread count is raised to one."""
        with patch.dict(os.environ, {"MIRGAN_THREADS": "0"}, clear=True):
            assert load_settings().threads == 1


class TestWorkerCount:
    """Tests for Settings.worker_count."""

    def test_capped_by_threads_and_jobs(self) -> None:
        """Test that the worker count never exceeds threads or jobs."""
        settings = Settings(log_level="INFO", threads=3, check_finite=True, run_log_enabled=True)
        assert settings.worker_count(10) == 3
        assert settings.worker_count(2) == 2
        assert settings.worker_count(0) == 1
