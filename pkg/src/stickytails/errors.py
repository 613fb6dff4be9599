"""Exception hierarchy shared across the package.

Every error raised by the library derives from :class:`StickyTailsError`,
so callers can catch the whole family with one clause.  Validation errors
carry the complete list of violated constraints, not just the first one.
"""

from __future__ import annotations


class StickyTailsError(Exception):
    """Base class for all library errors."""


class ModelValidationError(StickyTailsError):
    """Raised when a parameter tuple violates one or more standing assumptions.

    ``violations`` is a list of ``(code, message)`` pairs; ``code`` is one of
    the stable identifiers below so tests and callers can match on it.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{code}: {msg}" for code, msg in self.violations)
        super().__init__(f"invalid model parameters ({lines})")

    @property
    def codes(self):
        return [code for code, _ in self.violations]


# Stable violation codes used inside ModelValidationError.
NON_POSITIVE_DEFINITE_SIGMA = "NonPositiveDefiniteSigma"
UNSTABLE_REFLECTION = "UnstableReflection"
DEGENERATE_CORRELATION = "DegenerateCorrelation"
NON_POSITIVE_STICKINESS = "NonPositiveStickiness"


class SingularSystem(StickyTailsError):
    """The 3x3 linear system for the local-time rates is singular.

    Cannot occur for a stable reflection matrix; reported defensively.
    """


class DegenerateDiscriminant(StickyTailsError):
    """Leading coefficient of the kernel discriminant vanished (rho ~ 1)."""


class OutsideBranchCut(StickyTailsError):
    """Branch evaluation requested where the discriminant is negative."""


class BracketFailure(StickyTailsError):
    """A sign condition promised a root but none could be bracketed."""


class NoFiniteCandidate(StickyTailsError):
    """No finite singularity candidate (impossible: the branch point is finite)."""


class InconsistentSubcase(StickyTailsError):
    """Neither (or both) of two mutually exclusive sub-case tests fired."""


class UnreachableRegime(StickyTailsError):
    """Candidate geometry landed in a configuration the theory rules out."""


class ReflectionNotSubstochastic(StickyTailsError):
    """R is not of the form I - P^T with P substochastic, spectral radius < 1."""


class BlockTooSmall(StickyTailsError):
    """Extreme-value block size below 3 (log log n undefined or nonpositive)."""


class NonpositiveCoefficient(StickyTailsError):
    """Tail coefficient must be strictly positive."""


class MissingCoefficient(StickyTailsError):
    """Joint-tail evaluation requested without a fitted coefficient."""


class InsufficientExceedances(StickyTailsError):
    """Too few samples exceed the conditioning threshold (< 50)."""


class NoComplementarySolution(StickyTailsError):
    """The per-step reflection LCP had no valid solution (defensive)."""


class GridOutOfRange(StickyTailsError):
    """Requested sticky-time grid extends beyond the simulated clock range."""


class InsufficientTailData(StickyTailsError):
    """Not enough tail mass in the requested fit window."""


class ConfigError(StickyTailsError):
    """Run configuration file is malformed or violates the schema."""

    def __init__(self, message, pointer=None):
        self.pointer = pointer
        super().__init__(message if pointer is None else f"{pointer}: {message}")
