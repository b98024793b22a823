"""Exception types shared across the package."""


class InvalidConfig(ValueError):
    """A system or experiment configuration violates its constraints."""


class DimensionMismatch(ValueError):
    """Array shapes are inconsistent with the configured system."""


class ComplexityRefused(RuntimeError):
    """Exact BP was requested for a row weight above the configured cap."""


class MonostableRegime(RuntimeError):
    """An operation requiring a bistable potential was called where only
    one stable solution exists."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of the operation."""
