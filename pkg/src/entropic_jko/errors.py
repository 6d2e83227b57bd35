"""Exception types shared across the solver modules."""


class ConfigurationError(ValueError):
    """Invalid argument or configuration value (bad grid size, negative time, ...)."""


class GridMismatchError(ValueError):
    """Operands live on different grids."""


class DomainError(ValueError):
    """A density value lies outside the internal energy's domain."""


class LocalizationError(ValueError):
    """Measures too spread out for the line-based 1D Wasserstein formula."""


class ConvergenceError(RuntimeError):
    """An iterative solve did not converge.

    Optional attributes attached by the raiser:
      - ``diagnostics``: per-step diagnostics gathered so far
      - ``partial_trajectory``: states computed before the failure
      - ``residual``: last residual value
    """

    def __init__(self, message, *, residual=None, diagnostics=None):
        super().__init__(message)
        self.residual = residual
        self.diagnostics = diagnostics
        self.partial_trajectory = None
