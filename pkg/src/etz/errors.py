"""Exception types shared across the package.

Every error carries a stable, machine-readable ``code`` string so callers
(and the CLI) can dispatch on failure kind without parsing messages.
"""

from __future__ import annotations


class EtzError(Exception):
    """Base class for all package errors."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


class ValidationError(EtzError):
    """Invalid input data, parameter, or configuration."""


class InfeasibleDecompositionError(EtzError):
    """A variance component came out below the feasibility tolerance.

    The offending components are attached so callers can still inspect the
    (unclamped) values.
    """

    def __init__(self, code: str, message: str, components=None):
        super().__init__(code, message)
        self.components = components
