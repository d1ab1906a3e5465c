"""Exception types shared across the library.

Every error raised on a contract violation derives from RailError so callers
(and the CLI) can catch one base class. Errors that point at a specific input
row carry the offending row index.
"""


class RailError(Exception):
    """Base class for all library errors."""


class BadMagic(RailError):
    """File does not start with a recognized magic string."""


class DimensionMismatch(RailError):
    """Array shapes or declared dimensions disagree."""


class NonFiniteValue(RailError):
    """A feature row contains NaN or infinity."""

    def __init__(self, row, message=None):
        self.row = row
        super().__init__(message or f"non-finite value in row {row}")


class LabelOutOfRange(RailError):
    """A label falls outside the declared class range."""

    def __init__(self, row, message=None):
        self.row = row
        super().__init__(message or f"label out of range at row {row}")


class DuplicateClassName(RailError):
    """A class name is already registered."""


class OverlappingLabels(RailError):
    """An incremental update references classes that were already learned."""


class EmptyLabelSet(RailError):
    """No classes are available where at least one is required."""


class InfeasibleSeparation(RailError):
    """The requested angular margin cannot be realized in the given dimension."""


class EmptyGrid(RailError):
    """A hyper-parameter grid is empty."""


class InsufficientDomains(RailError):
    """An operation needs more domains than are available."""


class SingularSystem(RailError):
    """A linear system that should be positive definite failed to factorize."""


class StepError(RailError):
    """A learning or evaluation step failed; carries the step index."""

    def __init__(self, step, domain, cause):
        self.step = step
        self.domain = domain
        self.cause = cause
        super().__init__(f"step {step} ({domain}): {cause}")
