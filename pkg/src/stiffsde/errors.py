"""Exception types shared across the package."""


class StiffSdeError(Exception):
    """Base class for all package errors."""


class ConfigError(StiffSdeError, ValueError):
    """Invalid configuration: bad parameters, inadmissible step size,
    missing drift split, unknown method, and similar. The CLI maps this
    to exit code 2."""


class DomainError(StiffSdeError, ValueError):
    """State outside the domain a model is defined on (e.g. evaluation
    at x <= 0 for a model restricted to the positive half-line)."""


class SolverError(StiffSdeError, RuntimeError):
    """A nonlinear solve did not reach the requested residual tolerance.

    Carries the best residual norm seen and the iteration count so the
    failure can be diagnosed upstream.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
