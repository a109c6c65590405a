"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """An operation was called on inputs that violate its documented preconditions."""


class InternalInvariantError(RuntimeError):
    """A computed result breached an invariant that should hold by construction."""
