"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ContractError(TypeError):
    """An operation was called on a model variant it does not support."""


class CapabilityError(RuntimeError):
    """An instance exceeds an enumeration guard.

    The exact analyses in this package are exponential in the instance size,
    so every enumeration is guarded and refuses rather than running forever.
    """


class AnalysisError(RuntimeError):
    """An internal consistency check failed during chain analysis."""
