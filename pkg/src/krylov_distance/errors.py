"""Exception types raised by the library."""


class KrylovDistanceError(Exception):
    """Base class for all library errors."""


class DomainError(KrylovDistanceError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ContractError(KrylovDistanceError, ValueError):
    """Operands violate a calling contract (mismatched lattices, aliasing, ...)."""


class SizingError(KrylovDistanceError, MemoryError):
    """A requested allocation exceeds the configured memory budget."""

    def __init__(self, message: str, requested_bytes: int, budget_bytes: int):
        super().__init__(f"{message}: requested {requested_bytes} bytes, budget {budget_bytes} bytes")
        self.requested_bytes = requested_bytes
        self.budget_bytes = budget_bytes


class TruncationError(KrylovDistanceError, RuntimeError):
    """Field support reached the cube boundary while truncation is forbidden."""


class AnalysisError(KrylovDistanceError, ValueError):
    """A series cannot be analyzed (too few points, mismatched inputs, bad schema)."""


class ConfigError(KrylovDistanceError, ValueError):
    """Invalid experiment configuration."""
