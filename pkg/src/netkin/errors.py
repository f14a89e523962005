"""Exception hierarchy used across the package."""


class NetkinError(Exception):
    """Base class for all package errors."""


class DomainError(NetkinError, ValueError):
    """A site lies outside the site space it is evaluated on."""


class DimensionError(NetkinError, ValueError):
    """Array shapes do not match the site space or state dimension."""


class DegenerateStateError(NetkinError, ValueError):
    """A state cannot be normalised (all zero or non-finite)."""


class UnsupportedKernelError(NetkinError, TypeError):
    pass


class UnsupportedLawError(NetkinError, TypeError):
    pass


class StateViolationError(NetkinError, RuntimeError):
    """A sampled jump left the admissible state set."""


class NumericalError(NetkinError, RuntimeError):
    """A solver produced non-finite or inadmissible values."""

    def __init__(self, message, t=None):
        if t is not None:
            message = f"{message} (t={t:.6g})"
        super().__init__(message)
        self.t = t


class ConfigError(NetkinError, ValueError):
    """Scenario configuration failed validation."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration: " + "; ".join(self.problems))
