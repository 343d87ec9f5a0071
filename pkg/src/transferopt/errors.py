"""Exception hierarchy with stable machine-readable codes.

Every error that can surface at the CLI or HTTP boundary carries a short
code; the CLI prints it as ``E:<code>: <message>`` and the service embeds
it in structured error bodies.
"""

from __future__ import annotations


class TransferOptError(Exception):
    """Base class for all library errors."""

    code = "SCHEMA"

    def __str__(self) -> str:
        return super().__str__()


class SchemaError(TransferOptError):
    """Malformed or invalid input data (files, parameters, matrices)."""

    code = "SCHEMA"


class UnknownTaskError(TransferOptError):
    """A record or request references a task absent from the dictionary."""

    code = "UNKNOWN_TASK"


class ImageSetError(TransferOptError):
    """Competing transfers of one target were scored on different images."""

    code = "IMAGESET"


class ConvergenceError(TransferOptError):
    """The eigenvector iteration failed to converge."""

    code = "CONVERGENCE"

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class InfeasibleError(TransferOptError):
    """No selection satisfies the constraints (usually the budget)."""

    code = "INFEASIBLE"
