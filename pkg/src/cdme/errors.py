"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid run configuration."""


class Assumption2Violation(RuntimeError):
    """The degradation rate is not in the span of the truncated basis."""


class NumericalAbort(FloatingPointError):
    """A solver produced non-finite values or left its stability envelope."""


class BudgetExceeded(RuntimeError):
    """The requested work exceeds the configured budget."""
