"""Exception types raised across the package."""


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class UnsupportedError(NotImplementedError):
    """Operation is not available for the given mechanism or input size."""


class TreeValidationError(ValueError):
    """Malformed tree arrays. The message names the offending index."""


class CorrectnessAlarm(RuntimeError):
    """A probability-zero event (such as tied record values) was observed."""


class CalibrationError(RuntimeError):
    """Pilot run too noisy to fix an edge scale."""


class ConfigError(ValueError):
    """Experiment configuration failed validation."""
