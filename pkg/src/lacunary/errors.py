"""Exception and warning types shared across the package."""


class LacunaryError(Exception):
    """Base class for all package errors."""


class DomainError(LacunaryError, ValueError):
    """An input lies outside the domain of the operation."""


class UnsupportedInput(LacunaryError, TypeError):
    """The operation does not handle this kind of input (e.g. complex data)."""


class PoleError(LacunaryError, ZeroDivisionError):
    """Evaluation point coincides with a pole."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"evaluation point hits pole #{index}")


class ContourError(LacunaryError, RuntimeError):
    """Argument-principle bookkeeping did not close up."""


class SearchFailure(LacunaryError, RuntimeError):
    """No object with the requested property was found on the grid."""


class AnchorUnsuitable(LacunaryError, RuntimeError):
    """The full octave around an anchor does not satisfy the block inequality."""


class InsufficientSparseness(LacunaryError, RuntimeError):
    """Fewer than two anchors passed the sparseness trigger."""


class PrecisionWarning(UserWarning):
    """A numerical answer is close to the limit of double precision."""
