"""
Error hierarchy for the length-of-stay GLM toolkit.

Every error carries the process exit code the CLI reports for it:
- 2: input or validation error
- 3: schema / factor-level mismatch
- 4: numerical failure
"""

from typing import Optional


class LosError(Exception):
    """Base class for all toolkit errors"""

    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class InputError(LosError):
    """Unreadable input file or invalid run configuration"""

    exit_code = 2


class ParseError(LosError):
    """A cell could not be parsed into its column's type"""

    exit_code = 2

    def __init__(self, detail: str, row: Optional[int] = None, column: Optional[str] = None):
        location = ""
        if row is not None or column is not None:
            location = f" (row {row}, column '{column}')"
        super().__init__(f"{detail}{location}")
        self.row = row
        self.column = column


class DataValidationError(LosError):
    """Data violates a cleaning or modeling precondition"""

    exit_code = 2


class ColumnLookupError(LosError, KeyError):
    """Requested column does not exist"""

    exit_code = 2

    def __init__(self, name: str):
        super().__init__(f"Unknown column: '{name}'")
        self.name = name

    def __str__(self) -> str:
        return self.detail


class SchemaError(LosError):
    """Header or column names do not match what was expected"""

    exit_code = 3

    def __init__(self, detail: str, column: Optional[str] = None):
        super().__init__(detail)
        self.column = column


class EncodingError(LosError):
    """A factor level in the data is absent from its factor spec"""

    exit_code = 3

    def __init__(self, variable: str, level: str):
        super().__init__(f"Level '{level}' of factor '{variable}' is not in its factor spec")
        self.variable = variable
        self.level = level


class DomainError(LosError):
    """Value outside the domain of a family or formula"""

    exit_code = 4


class SingularDesignError(LosError):
    """Design matrix is not of full column rank"""

    exit_code = 4

    def __init__(self, aliased: list):
        super().__init__(f"Design matrix is rank deficient; aliased columns: {', '.join(aliased)}")
        self.aliased = list(aliased)


class InferenceError(LosError):
    """Covariance matrix unusable for Wald inference"""

    exit_code = 4


class ConvergenceWarning(UserWarning):
    """IRLS stopped at max_iterations without meeting the tolerance"""
