"""Exception types shared across the package."""


class NlxError(Exception):
    """Base class for all package errors."""


class DomainError(NlxError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigurationError(NlxError, ValueError):
    """Solver parameters are inconsistent (e.g. the lattice is too coarse)."""


class PreconditionError(NlxError, ValueError):
    """An input fails a documented precondition of the operation."""
