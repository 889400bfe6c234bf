"""Exception types raised across the package."""


class ERWError(Exception):
    """Base class for all erwstat errors."""


class InvalidPositionError(ERWError, ValueError):
    pass


class InvalidStepError(ERWError, ValueError):
    pass


class InsufficientDataError(ERWError, ValueError):
    """Raised when a statistic needs more steps than the path has."""


class DomainError(ERWError, ValueError):
    pass


class UnsupportedHypothesisError(ERWError, ValueError):
    pass


class UndefinedSplitError(ERWError, ValueError):
    """The log-likelihood ratio split hits an impossible observation."""


class ConfigurationError(ERWError):
    """A required artifact (e.g. a quantile table level) is missing or unusable."""


class PathFormatError(ERWError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
