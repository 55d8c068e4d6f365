"""Exception types shared across the package.

All errors raised by qstop derive from :class:`QstopError`, so callers can
distinguish library failures from generic Python errors.
"""


class QstopError(Exception):
    """Base class for all qstop errors."""


class DimensionLimitError(QstopError):
    """Raised when a requested grid would exceed the configured dense-matrix cap."""


class HorizonError(QstopError):
    """Raised when an operation would move content past the end of the grid.

    Shift isometries and flow endomorphisms are exact only on vectors and
    operators whose support fits in the remaining slots; violating that is a
    hard error, never a silent truncation.
    """


class AmpliationError(QstopError):
    """Raised on an ampliation mismatch (e.g. ampliating twice)."""


class StopTimeValidationError(QstopError):
    """Raised when candidate atoms fail the spectral-measure axioms.

    Carries the list of human-readable failure descriptions, one per violated
    invariant, each including the size of the violation.
    """

    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("; ".join(self.failures))


class CocycleBuildError(QstopError):
    """Raised when a one-step generator cannot produce a valid cocycle."""


class ScenarioError(QstopError):
    """Raised on scenario-file parse or validation problems."""
