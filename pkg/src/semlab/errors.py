"""Exception hierarchy shared across the package."""


class LabError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(LabError):
    """Input violates a documented invariant (bad score range, negative price, ...)."""


class ParseError(ValidationError):
    """A delimited input file could not be parsed; message carries the line number."""


class AlignmentError(ValidationError):
    """Panels or calendars do not line up; message lists the gaps."""


class WarmupError(LabError):
    """Not enough history for the longest indicator lookback."""


class RangeError(LabError):
    """A date range, horizon, or slice is out of bounds or empty."""


class NumericalError(LabError):
    """A linear-algebra step failed (singular covariance, non-finite values)."""


class RankError(NumericalError):
    """A system is rank deficient; message names the offending columns."""


class DegenerateFitError(LabError):
    """A model fit has no usable variation (all-neutral features, constant target)."""


class LeakageError(LabError):
    """An evaluation touches dates inside a model's fit range."""


class UndefinedMetricError(LabError):
    """A requested metric has no defined value (zero volatility, zero drawdown)."""


class DegenerateTestError(LabError):
    """A statistical test has no usable sample (all paired differences zero)."""


class PolicyFaultError(LabError):
    """A policy emitted non-finite actions; message carries the step index."""


class ConfigError(LabError):
    """An experiment configuration is malformed or inconsistent."""
