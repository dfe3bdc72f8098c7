"""Exception hierarchy.

Every error carries a short stable ``code`` so command-line failures can be
grepped for in logs.
"""

from __future__ import annotations


class FusedSpacingError(Exception):
    code = "E_GENERIC"

    def __str__(self) -> str:
        return f"[{self.code}] {super().__str__()}"


class ValidationError(FusedSpacingError, ValueError):
    code = "E_INPUT"


class DomainError(FusedSpacingError, ValueError):
    code = "E_DOMAIN"


class TieError(FusedSpacingError):
    """Two competitors are indistinguishable (generic position violated)."""

    code = "E_TIE"


class PathConsistencyError(FusedSpacingError, AssertionError):
    """An internal invariant of the path recursion failed."""

    code = "E_PATH"


class NumericalError(FusedSpacingError, ArithmeticError):
    code = "E_NUMERIC"


class SigmaEstimationError(FusedSpacingError, ValueError):
    code = "E_SIGMA"


class OracleFailure(FusedSpacingError, AssertionError):
    """A brute-force verifier detected an inconsistency."""

    code = "E_ORACLE"
