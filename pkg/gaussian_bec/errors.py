"""Exception hierarchy shared by all solver modules."""


class GaussianBECError(Exception):
    """Base class for every error raised by the package."""


class DomainError(GaussianBECError, ValueError):
    """Arguments outside the domain of an operation."""


class QuadratureError(GaussianBECError):
    """Radial quadrature did not converge."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class DivergenceError(GaussianBECError):
    """Relaxation produced non-finite values or ran away."""

    def __init__(self, message, step=None, state=None, reason="non-finite"):
        super().__init__(message)
        self.step = step
        self.state = state
        self.reason = reason


class CollapseError(DivergenceError):
    """Attractive collapse: the condensate width shrank below the allowed minimum."""

    def __init__(self, message, step=None, state=None):
        super().__init__(message, step=step, state=state, reason="collapse")


class NoSqueezedModeError(GaussianBECError):
    """The state carries no depleted population to extract a mode from."""


class AssemblyError(GaussianBECError):
    """A linear-response sector could not be assembled."""


class ConfigError(GaussianBECError):
    """Invalid run configuration."""

    def __init__(self, message, line=None, key=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
        self.key = key
