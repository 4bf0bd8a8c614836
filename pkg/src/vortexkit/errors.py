"""Exception hierarchy shared by every vortexkit module."""


class VortexKitError(Exception):
    """Base class for all vortexkit errors."""


class ValidationError(VortexKitError, ValueError):
    """Input violates a documented invariant (shape, finiteness, ordering)."""


class FormatError(VortexKitError):
    """On-disk data does not follow the expected binary layout."""


class LengthError(FormatError):
    """Payload is truncated or carries trailing bytes."""


class StencilError(VortexKitError, IndexError):
    """A finite-difference stencil would reach outside the grid."""


class DivergedError(VortexKitError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, loss):
        super().__init__(f"loss diverged at epoch {epoch}: {loss!r}")
        self.epoch = epoch
        self.loss = loss
