class InvalidParameterError(ValueError):
    """Raised for out-of-contract parameters or mismatched shapes."""


class DegenerateStateError(RuntimeError):
    """Raised when a probe state cannot be moved away from sigmoid kinks."""
