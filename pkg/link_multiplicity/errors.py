"""
Exception hierarchy for link-multiplicity.
Library code raises these; only the CLI turns them into exit codes.
"""

from pathlib import Path


class LinkMultiplicityError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class DomainError(LinkMultiplicityError, ValueError):
    """An argument lies outside the mathematical domain of a function."""

    exit_code = 2


class ValidationError(LinkMultiplicityError, ValueError):
    """
    Parameter, configuration or input-file validation failed.

    Args:
        message: Human readable summary
        violations: Every violated term, one entry each
    """

    exit_code = 2

    def __init__(self, message: str, violations: list[str] | None = None):
        self.violations = list(violations or [])
        detail = f": {'; '.join(self.violations)}" if self.violations else ""
        super().__init__(f"{message}{detail}")


class NumericalError(LinkMultiplicityError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy answer."""

    exit_code = 3


class RootFindingError(NumericalError):
    """The root solver did not converge; partial roots are kept but flagged invalid."""

    def __init__(self, message: str, partial_roots: list[complex] | None = None):
        self.partial_roots = list(partial_roots or [])
        self.valid = False
        super().__init__(message)


class ConsensusError(NumericalError):
    """Independent generic draws disagreed on the same invariant."""


class SplitError(NumericalError):
    """Link roots did not separate into a near group and a far group; use a smaller delta."""


class DegenerateSliceError(NumericalError):
    """The drawn direction is not generic for the curve."""


class SamplingError(NumericalError):
    """Rejection sampling exhausted its proposal budget."""


class CertificateMismatch(NumericalError):
    """The three multiplicity computations disagree."""


class ReportIOError(LinkMultiplicityError, OSError):
    """Reading or writing a report or point cloud failed."""

    exit_code = 4

    def __init__(self, message: str, path: Path | str):
        self.path = Path(path)
        super().__init__(f"{message} ({self.path})")
