"""Exception hierarchy.

Every domain error carries a stable ``code`` string so the CLI can report
it and tests can assert on it without matching message text.
"""

from __future__ import annotations

from dataclasses import dataclass


class ScreenflowError(Exception):
    code = "SCREENFLOW_ERROR"


@dataclass(frozen=True)
class Violation:
    code: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} at {self.path}: {self.message}"


class ScenarioValidationError(ScreenflowError):
    code = "SCENARIO_INVALID"

    def __init__(self, violations):
        self.violations = tuple(violations)
        lines = "\n".join(f"  - {v}" for v in self.violations)
        super().__init__(f"{len(self.violations)} scenario violation(s):\n{lines}")

    def __reduce__(self):
        return (type(self), (self.violations,))

    @property
    def codes(self) -> set[str]:
        return {v.code for v in self.violations}


class HorizonOverflowError(ScreenflowError):
    code = "HORIZON_OVERFLOW"


class TreeTooLargeError(ScreenflowError):
    code = "TREE_TOO_LARGE"


class NonpositiveHorizonError(ScreenflowError):
    code = "NONPOSITIVE_HORIZON"


class UnknownStageError(ScreenflowError):
    code = "UNKNOWN_STAGE"


class EmptySampleError(ScreenflowError):
    code = "EMPTY_SAMPLE"


class CIUndefinedError(ScreenflowError):
    code = "CI_UNDEFINED"


class PZeroError(ScreenflowError):
    code = "P_ZERO"


class UnknownParameterPathError(ScreenflowError):
    code = "UNKNOWN_PARAMETER_PATH"


class ValueOutOfRangeError(ScreenflowError):
    code = "VALUE_OUT_OF_RANGE"


class ReplicationError(ScreenflowError):
    """An engine failure tagged with the replication that raised it."""

    def __init__(self, index: int, cause: Exception):
        self.index = index
        self.cause = cause
        self.code = getattr(cause, "code", type(cause).__name__)
        super().__init__(f"replication {index}: {cause}")

    def __reduce__(self):
        return (type(self), (self.index, self.cause))
