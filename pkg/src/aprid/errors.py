"""Exception types shared across the package."""

__all__ = [
    "ApridError",
    "ConfigError",
    "DivergenceError",
    "ReferenceError",
    "ScheduleExhaustedError",
]


class ApridError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(ApridError):
    """Invalid experiment configuration.

    Collects every problem found during validation so a bad config file is
    reported in one shot instead of one key at a time.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))

    def itemized(self) -> str:
        return "\n".join(f"  - {p}" for p in self.problems)


class DivergenceError(ApridError):
    """A solver run produced non-finite or unboundedly growing state.

    Carries whatever checkpoint records were completed before the blow-up so
    the harness can persist a partial trajectory.
    """

    def __init__(self, message, iteration=None, partial_records=None):
        super().__init__(message)
        self.iteration = iteration
        self.partial_records = list(partial_records) if partial_records else []


class ReferenceError(ApridError):
    """The reference solver failed to reach the requested tolerance.

    Attributes carry the best iterate's residuals for diagnosis.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class ScheduleExhaustedError(ApridError):
    """A step schedule was asked for more steps than its horizon."""
