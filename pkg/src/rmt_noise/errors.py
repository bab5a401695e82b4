"""Exception types shared across the package."""


class RmtNoiseError(Exception):
    """Base class for package errors."""


class ValidationError(RmtNoiseError, ValueError):
    """A parameter or input structure violates a documented precondition."""


class EigsolverError(RmtNoiseError, RuntimeError):
    """The iterative eigensolver exhausted its budget without converging."""


class BranchTrackingError(RmtNoiseError, RuntimeError):
    """Root continuation for the self-consistent equation lost the physical sheet."""


class ResumeMismatchError(RmtNoiseError, RuntimeError):
    """An output directory holds results for a different config or seed."""
