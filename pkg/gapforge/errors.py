"""
Error types shared by all gapforge modules.

Each error knows the CLI exit code it maps to and how to render itself as
a machine-readable payload.
"""

from typing import Any, Dict, Optional

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_NUMERIC = 4


class GapForgeError(Exception):
    """Base class for all domain errors"""

    exit_code: int = EXIT_NUMERIC

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "error": type(self).__name__,
            "message": self.message,
            "exit_code": self.exit_code,
        }
        payload.update(self.details)
        return payload


class InvalidParamsError(GapForgeError):
    pass


class SingularBasisError(GapForgeError):
    pass


class DimensionMismatchError(GapForgeError):
    pass


class DegenerateInputError(GapForgeError):
    pass


class NoConvergenceError(GapForgeError):
    """Iterative eigensolver ran out of its iteration budget"""

    def __init__(
        self, message: str, residual: float = float("nan"), k_index: Optional[int] = None
    ):
        super().__init__(message, residual=residual, k_index=k_index)
        self.residual = residual
        self.k_index = k_index


class RootBracketingError(GapForgeError):
    pass


class EmptyGapError(GapForgeError):
    pass


class SolverStallError(GapForgeError):
    """SDP backend stopped without reaching the requested accuracy"""

    def __init__(self, message: str, best: Optional[Dict[str, Any]] = None, **details: Any):
        super().__init__(message, best=best or {}, **details)
        self.best = best or {}


class ConfigError(GapForgeError):
    exit_code = EXIT_CONFIG

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message, field=field, line=line)
        self.field = field
        self.line = line


class BudgetExhaustedError(GapForgeError):
    exit_code = EXIT_BUDGET
