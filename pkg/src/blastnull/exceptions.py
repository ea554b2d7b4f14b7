"""Error and warning types shared across the toolkit."""


class BlastnullError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(BlastnullError, ValueError):
    """An argument is outside its documented domain."""


class TruncationError(BlastnullError, ValueError):
    """FFT size smaller than the signal; truncation is rejected, not applied."""


class FrameError(BlastnullError, ValueError):
    """A path delay does not fit inside the analysis frame."""


class CalibrationError(BlastnullError, ValueError):
    """Level calibration is impossible (e.g. zero-energy path set)."""


class ConditioningError(BlastnullError, ValueError):
    """A matrix involved in estimation/detection is singular or too ill-conditioned."""


class DegenerateInputError(BlastnullError, ValueError):
    """The input lies entirely in the nulled subspace; the statistic is undefined."""


class PrecisionWarning(UserWarning):
    """A numeric routine could not certify its target accuracy."""


class ConvergenceWarning(UserWarning):
    """An iterative estimator stopped before meeting its convergence criterion."""
