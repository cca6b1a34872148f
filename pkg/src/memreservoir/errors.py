"""Exception types shared across the library."""


class MemReservoirError(Exception):
    """Base class for all library-specific errors."""


class DomainError(MemReservoirError, ValueError):
    """Numeric input outside the mathematical domain of an operation
    (non-finite values, non-positive scan coefficients, negative initial state)."""


class StructuralError(MemReservoirError, ValueError):
    """Shape, length, or dimension mismatch between inputs."""


class ParseError(MemReservoirError, ValueError):
    """Malformed dataset file. Carries the 1-based offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InitializationError(MemReservoirError, RuntimeError):
    """Model initialization failed (e.g. spectral radius estimate did not converge)."""


class NumericalError(MemReservoirError, RuntimeError):
    """A numerical solve failed; the message suggests a remedy."""


class ConfigurationError(MemReservoirError, ValueError):
    """Experiment configuration inconsistent with the provided data."""


class DiagnosticError(MemReservoirError, RuntimeError):
    """A forward pass produced invalid values; the message names the layer."""
