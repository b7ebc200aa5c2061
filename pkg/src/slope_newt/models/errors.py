from typing import Any, Dict, Optional


class SlopeError(Exception):
    """Base class for every error raised by the solver library."""


class ValidationError(SlopeError, ValueError):
    """
    Raised when an argument or an instance violates a documented invariant,
    e.g. a non-monotone weight sequence or mismatched dimensions.
    """


class DataFormatError(ValidationError):
    """
    Raised by the readers on malformed input.

    :ivar line: 1-based line number of the offending record, when known.
    :type line: Optional[int]
    """

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StagnationError(SlopeError):
    """
    Raised when a semismooth Newton subproblem keeps failing (line search
    exhausted or iteration cap reached) and the outer loop cannot recover by
    lowering the penalty parameter.

    :ivar diagnostics: Gradient norm, step information and penalty parameter at
        the point of failure.
    :type diagnostics: Dict[str, Any]
    """

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class NumericalError(SlopeError, ArithmeticError):
    """
    Raised when a NaN or Inf shows up in an iterate.

    :ivar state: Snapshot of the solver state (iteration, penalty parameter,
        norms of the iterates) taken when the non-finite value was detected.
    :type state: Dict[str, Any]
    """

    def __init__(self, message: str, state: Optional[Dict[str, Any]] = None):
        self.state = dict(state or {})
        super().__init__(f"{message} (state: {self.state})")
