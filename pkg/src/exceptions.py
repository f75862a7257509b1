"""Error hierarchy shared by the library layers and the command line.

Every error carries a machine-readable `code`; the command layer maps error
classes to process exit codes.
"""

from typing import Any


class MirGanError(Exception):
    """Base class for all errors raised by this package."""

    code = "MIRGAN_ERROR"

    def context(self) -> dict[str, Any]:
        """Structured details for error reports."""
        return {}


class DimensionError(MirGanError, ValueError):
    """Operand shapes do not agree."""

    code = "DIMENSION_MISMATCH"


class DomainError(MirGanError, ValueError):
    """Input outside the mathematical domain of an operation."""

    code = "DOMAIN_ERROR"


class InputError(MirGanError, ValueError):
    """Malformed data input (labels out of range, wrong lengths)."""

    code = "INVALID_INPUT"


class UsageError(MirGanError, RuntimeError):
    """API misuse (non-scalar loss, missing tape)."""

    code = "USAGE_ERROR"


class ConfigurationError(MirGanError, ValueError):
    """Invalid configuration value or combination."""

    code = "INVALID_CONFIG"


class RefusalError(MirGanError):
    """A command declined to run (for example a non-empty output directory)."""

    code = "REFUSED"


class NonFiniteError(MirGanError, FloatingPointError):
    """An operation produced NaN or Inf."""

    code = "NON_FINITE"

    def __init__(self, op: str, message: str | None = None) -> None:
        self.op = op
        super().__init__(message or f"{op} produced non-finite values")

    def context(self) -> dict[str, Any]:
        return {"op": self.op}


class FormatError(MirGanError, ValueError):
    """A binary or manifest file does not match its declared format."""

    code = "FORMAT_ERROR"

    def __init__(self, message: str, section: str, offset: int | None = None) -> None:
        self.section = section
        self.offset = offset
        where = f" (section={section}" + (f", offset={offset})" if offset is not None else ")")
        super().__init__(message + where)

    def context(self) -> dict[str, Any]:
        return {"section": self.section, "offset": self.offset}


class CheckpointError(MirGanError):
    """A checkpoint cannot be used with the requested configuration."""

    code = "CHECKPOINT_INCOMPATIBLE"

    def __init__(self, message: str, field: str | None = None) -> None:
        self.field = field
        super().__init__(message)

    def context(self) -> dict[str, Any]:
        return {"field": self.field}


class DivergenceError(MirGanError):
    """Training produced a non-finite loss; carries every loss component."""

    code = "NUMERIC_DIVERGENCE"

    def __init__(self, step: int, components: dict[str, float | None], cause: str = "") -> None:
        self.step = step
        self.components = components
        self.cause = cause
        super().__init__(f"non-finite loss at step {step}: {components} {cause}".strip())

    def context(self) -> dict[str, Any]:
        return {"step": self.step, "components": self.components, "cause": self.cause}
