"""
Error types shared by the lab.

Every failure the command line can report derives from RedlabError and
carries the exit code the CLI returns for it.
"""

from enum import Enum
from typing import Optional


class ExclusionReason(str, Enum):
    """Why a prime was left out of a scan. Values are stable: the cache stores them."""
    NUMERATOR = "numerator"
    DENOMINATOR = "denominator"
    BAD_REDUCTION = "bad_reduction"
    STUDIED_PRIME = "studied_prime"
    TORSION_ORDER = "torsion_order"
    BUDGET = "budget"

    @property
    def code(self) -> int:
        return _REASON_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "ExclusionReason":
        for reason, value in _REASON_CODES.items():
            if value == code:
                return reason
        raise ValueError(f"unknown exclusion code {code}")


# 0 is reserved for "included" in the cache status byte
_REASON_CODES = {
    ExclusionReason.NUMERATOR: 1,
    ExclusionReason.DENOMINATOR: 2,
    ExclusionReason.BAD_REDUCTION: 3,
    ExclusionReason.STUDIED_PRIME: 4,
    ExclusionReason.TORSION_ORDER: 5,
    ExclusionReason.BUDGET: 6,
}


class RedlabError(Exception):
    exit_code = 1


class ConfigurationError(RedlabError):
    exit_code = 2


class StudyParseError(ConfigurationError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PointNotOnCurveError(ConfigurationError):
    pass


class PresentationError(ConfigurationError):
    pass


class NotAUnitError(ConfigurationError):
    pass


class TorsionCollisionError(ConfigurationError):
    pass


class FactorizationBudgetError(RedlabError):
    exit_code = 5

    def __init__(self, cofactor: int):
        self.cofactor = cofactor
        super().__init__(f"factorization budget exceeded: cannot split cofactor {cofactor}")


class BudgetExhaustedError(RedlabError):
    exit_code = 5


class ExclusionError(RedlabError):
    """A prime at which a reduction is not defined (or not trusted)."""

    def __init__(self, reason: ExclusionReason, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason.value}{': ' + detail if detail else ''}")


class KummerError(ConfigurationError):
    pass


class LevelTooLowError(KummerError):
    pass


class NoStabilizationError(KummerError):
    exit_code = 5


class CacheError(RedlabError):
    exit_code = 4


class StaleCacheError(CacheError):
    pass


class CorruptCacheError(CacheError):
    pass


class ConsistencyError(RedlabError):
    """Two independent computations of the same quantity disagree."""
    exit_code = 3


class ScanWorkerError(RedlabError):
    """A scan block failed. Keeps the exit code of the underlying lab error, 4 otherwise."""
    exit_code = 4

    def __init__(self, lo: int, message: str, exit_code: Optional[int] = None):
        self.lo = lo
        if exit_code is not None:
            self.exit_code = exit_code
        super().__init__(f"scan block starting at {lo} failed: {message}")
