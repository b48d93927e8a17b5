"""Exception hierarchy.

Domain errors (everything deriving from :class:`DomainError`) signal that the
requested computation is meaningless or unaffordable for the given input; the
CLI maps them to exit status 2. Anything else is a bug or an I/O problem.
"""


class SigInvertError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(SigInvertError):
    """A well-formed request that cannot be carried out on this input."""


class CapacityError(DomainError):
    """A dense level or a word enumeration would exceed the configured budget."""


class DepthError(DomainError):
    """A coefficient beyond the truncation depth of a signature was requested."""


class ShapeError(SigInvertError, ValueError):
    """Dimension or depth mismatch between two tensors."""


class DegeneratePathError(DomainError):
    """The path has zero length, so no uniform-speed parametrization exists."""


class AccuracyError(DomainError):
    """Quadrature refinement did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


class NoDirectionError(DomainError):
    """No candidate direction carries more than half of the symmetrized mass."""


class SignIndeterminateError(DomainError):
    """A sign statistic vanished exactly on a piece that is not degenerate."""


class InconsistentReconstructionError(DomainError):
    """Recovered directions and signs cannot account for the level-1 increment."""
