"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class TruncationError(RuntimeError):
    """A sup or series could not be resolved within the configured index/range cap."""


class PreconditionError(ValueError):
    """An input fails a documented precondition (e.g. missing class certificate)."""
