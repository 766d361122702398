"""Exception hierarchy shared by every netorch module."""

from __future__ import annotations


class NetOrchError(Exception):
    """Base class for all netorch errors."""


# registry
class DuplicateModelId(NetOrchError):
    pass


class InvalidDescriptor(NetOrchError):
    pass


class ParseError(NetOrchError):
    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


# planner / selector / executor
class UnrecognizedIntent(NetOrchError):
    pass


class BackendError(NetOrchError):
    pass


class NoModelForTask(NetOrchError):
    pass


class DimensionMismatch(NetOrchError, ValueError):
    pass


class EnvelopeParseError(NetOrchError):
    def __init__(self, path: str, message: str = "invalid envelope"):
        self.path = path
        super().__init__(f"{message}: {path}")


class PlanInvalid(NetOrchError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations) or "invalid plan")


# solvers / simenv
class InvalidProblem(NetOrchError, ValueError):
    pass


class ShapeMismatch(NetOrchError, ValueError):
    pass


class InfeasibleInput(NetOrchError, ValueError):
    pass


class AllZero(NetOrchError, ValueError):
    pass


class NonConvergence(NetOrchError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class InvalidGeometry(NetOrchError, ValueError):
    pass


# memory
class UnknownRecord(NetOrchError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else "unknown record"


class InvalidRating(NetOrchError, ValueError):
    pass


# llm gateway
class TransportError(BackendError):
    pass


class ProtocolError(BackendError):
    def __init__(self, field: str, message: str = "malformed response"):
        self.field = field
        super().__init__(f"{message}: {field}")


class AuthError(BackendError):
    pass


class PlanRejected(BackendError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("plan rejected: " + "; ".join(str(v) for v in self.violations))
