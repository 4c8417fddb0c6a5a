"""
Exception hierarchy for the joint-modeling engine.
Routers map these to process exit codes.
"""

from typing import List, Optional

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3


class JMRMTError(Exception):
    """Base class for all engine errors"""

    exit_code: int = EXIT_FAILURE


class CohortFormatError(JMRMTError):
    """Malformed cohort CSV; carries the 1-based file line number"""

    exit_code = EXIT_VALIDATION

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class CohortValidationError(JMRMTError):
    """Cohort failed validation; `issues` holds every blocking issue"""

    exit_code = EXIT_VALIDATION

    def __init__(self, issues: list):
        self.issues = issues
        lines = "; ".join(str(issue) for issue in issues)
        super().__init__(f"cohort validation failed: {lines}")


class NumericDomainError(JMRMTError, ValueError):
    """Argument outside the domain of a numerical kernel"""

    exit_code = EXIT_VALIDATION

    def __init__(self, message: str, value: Optional[float] = None):
        self.value = value
        super().__init__(message)


class ContractViolation(JMRMTError):
    """Internal precondition broken (unresolved status, bad switch map, ...)"""


class IntractableInstanceError(JMRMTError):
    """Oracle refuses instances too large to enumerate"""

    exit_code = EXIT_VALIDATION


class SimulationError(JMRMTError):
    exit_code = EXIT_VALIDATION


class ConfigError(JMRMTError):
    """Run-config schema violation; `fields` lists the offending field paths"""

    exit_code = EXIT_VALIDATION

    def __init__(self, message: str, fields: Optional[List[str]] = None):
        self.fields = fields or []
        super().__init__(message)


class ConvergenceError(JMRMTError):
    exit_code = EXIT_CONVERGENCE

    def __init__(self, message: str, failing: Optional[dict] = None):
        self.failing = failing or {}
        super().__init__(message)


class ResultsError(JMRMTError):
    """Missing, unreadable or mismatched fit directories"""

    exit_code = EXIT_VALIDATION
