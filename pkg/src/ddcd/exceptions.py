class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class NumericalError(FloatingPointError):
    """Raised when a fit produces a non-finite loss.

    ``diagnostics`` carries the iteration number and the loss components
    observed at the failing step.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
