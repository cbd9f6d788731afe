"""Exception hierarchy shared by all frontier_lab modules."""


class FrontierLabError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FrontierLabError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegreeTooHigh(FrontierLabError, ValueError):
    """The window holds fewer points than the polynomial has coefficients."""

    def __init__(self, n_points, degree):
        super().__init__(
            f"window has {n_points} point(s), need at least {degree + 1} for degree {degree}"
        )
        self.n_points = n_points
        self.degree = degree


class NumericalDegeneracy(FrontierLabError, ArithmeticError):
    """The linear program could not be solved reliably.

    ``diagnostics`` carries whatever the solver knew when it gave up
    (basis, smallest pivot, phase, iteration count).
    """

    def __init__(self, message, **diagnostics):
        detail = ", ".join(f"{k}={v!r}" for k, v in diagnostics.items())
        super().__init__(f"{message} ({detail})" if detail else message)
        self.diagnostics = diagnostics


class EstimationError(FrontierLabError, ValueError):
    """An estimator was asked for a value it cannot produce (e.g. empty window)."""


class UnsupportedModeError(FrontierLabError, ValueError):
    """A critical-value mode is not available for the requested test."""


class ConfigError(FrontierLabError, ValueError):
    """Invalid experiment configuration; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line
