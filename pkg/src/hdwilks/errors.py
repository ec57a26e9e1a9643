"""Exception hierarchy shared by all modules."""


class HdwError(Exception):
    """Base class for errors raised by this package."""


class DomainError(HdwError, ValueError):
    """An input lies outside the region where a quantity is defined."""


class RatioDomainError(DomainError):
    """A dimension ratio violates the strict (0, 1) requirement of the corrected tests."""


class SingularDesignError(HdwError, ValueError):
    """The regressor matrix (or one of its blocks) is numerically rank deficient."""


class SingularCovarianceError(HdwError, ValueError):
    """The residual covariance estimate is singular, so log-determinants are undefined."""


class EstimationError(HdwError, ValueError):
    """A plug-in estimate came out outside its admissible range."""


class ConvergenceError(HdwError, RuntimeError):
    """A numerical procedure failed to reach its requested accuracy."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved
