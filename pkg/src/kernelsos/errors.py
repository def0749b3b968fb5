"""Exception hierarchy shared across the package."""

import numpy as np


class KernelSOSError(Exception):
    """Base class for all errors raised by kernelsos."""


class ValidationError(KernelSOSError, ValueError):
    """Invalid user input (shapes, ranges, malformed domains or configs)."""


class PreconditionError(ValidationError):
    """A documented precondition of an operation does not hold."""


class UnsupportedDimensionError(KernelSOSError):
    """The requested dimension exceeds what a generator supports."""


class UnsupportedOrderError(KernelSOSError):
    """A kernel order has no available evaluation backend."""


class NumericalRankError(KernelSOSError, np.linalg.LinAlgError):
    """Cholesky failed for every jitter in the schedule."""


class OutOfDomainError(KernelSOSError, np.linalg.LinAlgError):
    """The dual iterate left the domain of the log-det barrier."""


class SingularSystemError(KernelSOSError, np.linalg.LinAlgError):
    """The Newton system stayed singular after regularization."""
