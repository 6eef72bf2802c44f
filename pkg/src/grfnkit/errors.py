"""Exception types shared across the toolkit."""

from __future__ import annotations


class GrfnkitError(Exception):
    """Base class for all toolkit errors."""


class FortranSyntaxError(GrfnkitError):
    """Malformed source text. Carries a 1-based source position."""

    def __init__(self, message: str, line: int, column: int = 1, path: str | None = None):
        self.message = message
        self.line = line
        self.column = column
        self.path = path
        super().__init__(str(self))

    def __str__(self) -> str:
        where = f"{self.path or '<source>'}:{self.line}:{self.column}"
        return f"{where}: {self.message}"


class UnsupportedFeatureError(FortranSyntaxError):
    """Source uses a Fortran construct outside the supported subset."""


class ValidationError(GrfnkitError):
    """An IR-level contract was violated (raised only by strict entry points)."""


class CycleError(GrfnkitError):
    """Dependency graph contains a cycle."""

    def __init__(self, cycle: tuple[str, ...]):
        self.cycle = cycle
        super().__init__("circular dependency: " + " -> ".join(cycle + (cycle[0],)))


class LoweringError(GrfnkitError):
    """A container cannot be lowered to a function network."""


class ExecutionError(GrfnkitError):
    """Base class for runtime evaluation failures."""


class UnboundInputError(ExecutionError):
    """A network input variable was not bound before execution."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"input variable {name!r} is not bound")


class DomainError(ExecutionError):
    """An arithmetic operation left its domain (log/sqrt of negative, x/0, ...)."""

    def __init__(self, message: str, node_id: str | None = None):
        self.message = message
        self.node_id = node_id
        where = f" [at node {node_id}]" if node_id else ""
        super().__init__(message + where)


class NonDifferentiableError(ExecutionError):
    """The requested derivative flows through a boolean value outside a decision."""


class NoAssignNodesError(GrfnkitError):
    """Equation matching needs at least one assignment node."""


class LatexParseError(GrfnkitError):
    """Malformed LaTeX math input. Carries a 0-based character offset."""

    def __init__(self, message: str, position: int, source: str | None = None):
        self.message = message
        self.position = position
        self.source = source
        where = f"{source}: " if source else ""
        super().__init__(f"{where}at offset {position}: {message}")
