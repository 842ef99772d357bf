"""
Exceptions raised by the covariance magnetometry pipeline.
"""

from __future__ import annotations


class CovmagError(Exception):
    pass


class InvalidParameterError(CovmagError, ValueError):
    """A value lies outside the range its type allows."""


class SamplingError(InvalidParameterError):
    """The time grid is too coarse for the spectral content of a source."""


class CoverageError(InvalidParameterError):
    """A grid or spectrum does not span the window it is evaluated on."""


class ZeroContrastError(CovmagError, ZeroDivisionError):
    """The readout channel cannot distinguish the two spin states."""


class UndefinedCorrelationError(CovmagError, ZeroDivisionError):
    """One of the signal lists has zero variance."""


class UnsupportedModeError(CovmagError):
    pass


class UnreachableSensitivityError(CovmagError):
    """The requested noise level cannot be reached in the given total time.

    minimal_time is the total time at which the target becomes reachable.
    """

    def __init__(self, message: str, minimal_time: float) -> None:
        super().__init__(message)
        self.minimal_time = minimal_time


class ConfigurationError(InvalidParameterError):
    """A problem with an experiment config, addressed by field path and line."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.field = field
        self.line = line

    def __str__(self) -> str:
        where = self.field or "<config>"
        if self.line is not None:
            where = f"{where} (line {self.line})"
        return f"{where}: {self.message}"


class ConfigurationErrors(ConfigurationError):
    """Several diagnostics collected from one config file."""

    def __init__(self, diagnostics: list[ConfigurationError]) -> None:
        super().__init__(f"{len(diagnostics)} configuration error(s)")
        self.diagnostics = diagnostics

    def __str__(self) -> str:
        return "\n".join(str(d) for d in self.diagnostics)


class StageError(CovmagError):
    """A pipeline stage failed; the original exception is the __cause__."""

    def __init__(self, stage: str, cause: BaseException) -> None:
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
