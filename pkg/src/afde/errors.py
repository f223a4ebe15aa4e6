"""Exception types that map onto the CLI exit codes."""


class ConfigError(ValueError):
    """Invalid configuration or inputs (exit code 1)."""

    def __init__(self, message: str, errors: list[str] | None = None):
        self.errors = list(errors) if errors else [message]
        super().__init__(message)


class NumericalFailure(RuntimeError):
    """NaN, non-convergence or step budget exhausted (exit code 2)."""


class VerificationFailure(AssertionError):
    """A verification criterion did not hold (exit code 3)."""
