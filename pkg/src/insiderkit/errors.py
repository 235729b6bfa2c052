"""Exception types shared across the toolkit."""


class InsiderKitError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(InsiderKitError):
    """A log file is missing required columns."""


class RecordParseError(InsiderKitError):
    """A single log row could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(InsiderKitError):
    """Invalid configuration value or CLI usage."""


class NumericError(InsiderKitError):
    """Training or scoring produced non-finite values."""


class UndefinedMetricError(InsiderKitError):
    """Metric denominator is zero; the value must be reported as n/a."""


class CalibrationError(InsiderKitError):
    """Threshold calibration is impossible on the given scores."""


class NotTrainedError(InsiderKitError):
    """A model was used for scoring before being trained."""


class NotCalibratedError(InsiderKitError):
    """Classification was requested before a threshold was set."""
