"""
Error hierarchy for renege-ldp

Parameter problems derive from ParameterError (exit status 2 at the CLI),
numerical failures from NumericsError (exit status 3).
"""
from typing import Any, Dict, Optional


class RenegeLDPError(Exception):
    """Base class for all library errors"""

    code = "RenegeLDPError"
    exit_status = 1

    def __init__(self, message: str = "", details: Optional[Dict[str, Any]] = None):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable form used by the CLI error output"""
        return {
            "error": self.code,
            "message": self.message,
            "details": self.details,
        }


class ParameterError(RenegeLDPError, ValueError):
    """Input violates a documented precondition"""

    code = "ConfigInvalid"
    exit_status = 2


class NumericsError(RenegeLDPError, ArithmeticError):
    """A numerical routine failed to deliver its postcondition"""

    code = "NumericsFailed"
    exit_status = 3


# Parameter errors
class RateNonpositive(ParameterError):
    code = "RateNonpositive"


class LambdaLessThanMu(ParameterError):
    code = "LambdaLessThanMu"


class ManyServerX0TooSmall(ParameterError):
    code = "ManyServerX0TooSmall"


class HorizonNonpositive(ParameterError):
    code = "HorizonNonpositive"


class NegativeArgument(ParameterError):
    code = "NegativeArgument"


class BoundaryInfeasible(ParameterError):
    code = "BoundaryInfeasible"


class GridTooCoarse(ParameterError):
    code = "GridTooCoarse"


class NegativeStart(ParameterError):
    code = "NegativeStart"


class GammaNonpositive(ParameterError):
    code = "GammaNonpositive"


class HorizonTooShort(ParameterError):
    code = "HorizonTooShort"


class ControlNotPositive(ParameterError):
    code = "ControlNotPositive"


class ConfigInvalid(ParameterError):
    code = "ConfigInvalid"


# Numerical errors
class BracketingFailed(NumericsError):
    code = "BracketingFailed"


class OptimalityViolated(NumericsError):
    code = "OptimalityViolated"


class NotConverged(NumericsError):
    code = "NotConverged"


class NumericsFailed(NumericsError):
    code = "NumericsFailed"
