"""Structured JSON-lines logger for training and evaluation runs.

Logs to standard error, one JSON object per line, so that standard output
stays free for command reports.
"""

import json
import logging
import math
import sys
from datetime import UTC, datetime
from typing import Any

from src.config import settings


def _clean(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_clean(v) for v in value]
    return value


class RunLogger:
    """Logs run lifecycle events to structured JSON lines."""

    def __init__(self, enabled: bool = True) -> None:
        """Initialize the run logger.

        Args:
            enabled: When False, events are dropped.
        """
        self.enabled = enabled
        self.logger = logging.getLogger("run_logger")
        self.logger.setLevel(logging.INFO)

        if not self.logger.handlers:
            handler = logging.StreamHandler(stream=sys.stderr)
            handler.setLevel(logging.INFO)
            handler.setFormatter(logging.Formatter("%(message)s"))
            self.logger.addHandler(handler)
        self.logger.propagate = False

    def log_event(self, run_id: str, event: str, **fields: Any) -> None:
        """Log one event.

        Args:
            run_id: Identifier of the run (output directory name or ablation cell).
            event: Event name (e.g., "run_start", "eval", "checkpoint").
            **fields: Event payload; non-finite floats are written as strings.
        """
        if not self.enabled:
            return
        entry = {
            "timestamp": datetime.now(UTC).isoformat(),
            "run_id": run_id,
            "event": event,
            **_clean(fields),
        }
        self.logger.info(json.dumps(entry, sort_keys=True))

    def log_run_start(self, run_id: str, command: str, config: dict[str, Any]) -> None:
        self.log_event(run_id, "run_start", command=command, config=config)

    def log_step(self, run_id: str, metrics: dict[str, Any]) -> None:
        self.log_event(run_id, "step", **metrics)

    def log_run_end(self, run_id: str, status: str, **fields: Any) -> None:
        """Log the end of a run.

        Args:
            run_id: Identifier of the run.
            status: Run status (ok, diverged, failed).
            **fields: Final summary values.
        """
        self.log_event(run_id, "run_end", status=status, **fields)


# Global logger instance
_run_logger: RunLogger | None = None


def get_run_logger() -> RunLogger:
    """Get or create the global run logger instance.

    Returns:
        The global run logger instance.
    """
    global _run_logger
    if _run_logger is None:
        _run_logger = RunLogger(enabled=settings.run_log_enabled)
    return _run_logger
