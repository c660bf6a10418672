"""Exception hierarchy shared by the library and the CLI."""

from typing import Any, Dict, Optional


class ShiftlabError(Exception):
    """Base class for all shiftlab errors."""

    exit_code = 1


class ConfigError(ShiftlabError, ValueError):
    """Invalid configuration or incompatible model construction."""

    exit_code = 2


class DimensionError(ConfigError):
    """Tensor shapes that do not line up; the message names the offending axis."""


class ValidationError(ShiftlabError, ValueError):
    """Invalid input values (targets, queries, graph paths)."""

    exit_code = 2


class GenerationError(ShiftlabError, RuntimeError):
    """Scene placement failed after exhausting its attempts."""

    exit_code = 3


class NumericError(ShiftlabError, RuntimeError):
    """Non-finite values during training."""

    exit_code = 3

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CheckpointError(ShiftlabError, IOError):
    """Unreadable, mismatched or foreign checkpoint file."""

    exit_code = 4


class DatasetError(ShiftlabError, IOError):
    """Missing or malformed dataset files."""

    exit_code = 4
