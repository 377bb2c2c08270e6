from typing import Any, Optional


class FanoCQEDError(Exception):
    """Base class for all library errors"""


class SchemaError(FanoCQEDError):
    """Input document or trace does not match the expected shape"""


class NumericalError(FanoCQEDError):
    """Integration, truncation or linear-algebra failure"""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConvergenceError(FanoCQEDError):
    """Fit stopped before converging; carries the best result found so far"""

    def __init__(self, message: str, best: Any = None):
        super().__init__(message)
        self.best = best
