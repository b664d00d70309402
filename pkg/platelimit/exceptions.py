"""Exception hierarchy for platelimit."""

from typing import List, Optional


class PlateLimitError(Exception):
    """Base class for all errors raised by platelimit."""


class InvalidArgumentError(PlateLimitError, ValueError):
    """An argument is outside its admissible range."""


class MeshValidationError(PlateLimitError):
    """A triangulation violates one of the mesh invariants."""

    def __init__(self, message: str, issues: Optional[List[str]] = None):
        self.issues = list(issues or [])
        details = "; ".join(self.issues[:10])
        if len(self.issues) > 10:
            details += f"; ... ({len(self.issues) - 10} more)"
        super().__init__(f"{message}: {details}" if details else message)


class MeshParseError(PlateLimitError):
    """A mesh file could not be parsed."""

    def __init__(self, path: str, line_number: int, message: str):
        self.path = path
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {message}")


class ExpressionError(PlateLimitError):
    """A strength or load expression is malformed or cannot be evaluated."""

    def __init__(self, expression: str, position: int, message: str):
        self.expression = expression
        self.position = position
        super().__init__(f"{message} at position {position} in {expression!r}")


class AssemblyError(PlateLimitError):
    """The discrete limit-analysis problem cannot be assembled."""

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"[{code}] {message}")


class SolverFailure(PlateLimitError):
    """The conic solver did not reach an optimal point."""

    def __init__(self, solution, message: str = "conic solve did not reach optimality"):
        self.solution = solution
        residuals = solution.residuals
        super().__init__(
            f"{message}: status={solution.status.value}, "
            f"r_primal={residuals.primal:.3e}, r_dual={residuals.dual:.3e}, "
            f"gap={residuals.gap:.3e}, iterations={solution.iterations}"
        )


class ConfigError(PlateLimitError):
    """A run configuration failed schema validation."""

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer or "/"
        super().__init__(f"{self.pointer}: {message}")
