"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when a configuration is internally inconsistent or infeasible.

    The CLI maps this to exit code 2.
    """
