"""
errors.py - Exception hierarchy for the spectral laboratory

Every error carries the process exit code the CLI should use:
- 2: an asserted check failed
- 3: the configuration is invalid
- 4: a numerical computation aborted
"""


class BolaxError(Exception):
    """Base class for all laboratory errors."""

    exit_code: int = 1


class ConfigError(BolaxError):
    """Configuration could not be parsed or validated."""

    exit_code = 3


class CheckFailure(BolaxError):
    """An asserted invariant or acceptance check did not hold."""

    exit_code = 2

    def __init__(self, check: str, detail: str):
        super().__init__(f"{check}: {detail}")
        self.check = check


# =============================================================================
# Numerical aborts
# =============================================================================


class NumericalAbort(BolaxError):
    """A numerical routine could not produce a trustworthy result."""

    exit_code = 4


class LatticeError(NumericalAbort):
    """Index out of range, duplicate index or lattice mismatch."""


class ExponentCapError(NumericalAbort):
    """An exponential weight would exceed the double-precision margin."""


class SeriesError(NumericalAbort):
    """A lattice series diverges or was asked for outside its domain."""


class ResolventError(NumericalAbort):
    """The shifted Lax matrix is singular or not positive definite."""


class NeumannDivergence(ResolventError):
    """The Neumann series hit its term budget before reaching tolerance."""


class EigenError(NumericalAbort):
    """The Hermitian eigensolver returned an inaccurate decomposition."""


class ConstantsError(NumericalAbort):
    """Closed forms and partial sums of a geometric constant disagree."""


class TrappingError(NumericalAbort):
    """The energy level lies at or above the trapping threshold A_max."""


class SmallnessError(NumericalAbort):
    """Initial data violates one of the two smallness conditions."""

    def __init__(self, failed: list[str]):
        super().__init__("smallness violated: " + "; ".join(failed))
        self.failed = failed


class StepSizeError(NumericalAbort):
    """A step-halving or step-doubling self-check failed."""


class NormExplosion(NumericalAbort):
    """The analytic norm left the admissible region during integration."""
