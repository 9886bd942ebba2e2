"""Exception hierarchy shared by all eqsi modules."""


class EqsiError(Exception):
    """Base class for all library errors."""


class ParameterError(EqsiError):
    """A scalar argument or configuration value is out of range."""


class SegmentationError(EqsiError):
    """A waveform is too short, or a segment is empty/ill-formed."""


class SignalError(EqsiError):
    """A signal contains NaN/Inf where finite values are required."""


class ShapeError(EqsiError):
    """Array dimensions do not match what an operation expects."""


class TapeError(EqsiError):
    """A backward pass was attempted with a stale forward tape."""


class OptimError(EqsiError):
    """An optimizer step received non-finite gradients."""


class DataError(EqsiError):
    """A dataset is empty, single-class, or otherwise unusable."""


class MetricUndefined(EqsiError):
    """A metric has no defined value (e.g. improvement over a closed eye)."""


class ObjectiveError(EqsiError):
    """An objective function returned a non-finite fitness."""


class BudgetError(EqsiError):
    """A requested search exceeds the evaluation budget."""


class ConfigError(EqsiError):
    """A run configuration is inconsistent or incomplete."""
