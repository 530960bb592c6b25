"""Exception types shared across the package."""


class GasketError(Exception):
    """Base class for all package errors."""


class ResourceLimitError(GasketError):
    """Requested computation exceeds a configured size limit."""


class ComputationError(GasketError):
    """A numerical routine failed to meet its contract."""


class UsageError(GasketError):
    """Invalid arguments or configuration."""
