"""Exception hierarchy shared by all modules."""


class CurvedBeamError(Exception):
    """Base class for every error raised by this package."""


class DomainError(CurvedBeamError, ValueError):
    """An argument is outside the domain of a formula (non-positive intensity, length...)."""


class OutOfDomainError(CurvedBeamError, ValueError):
    """A query point lies outside the phantom."""


class LayoutTooDenseError(CurvedBeamError, ValueError):
    """Optode spacing along the boundary falls below the resolution cap."""


class ResolutionError(CurvedBeamError, ValueError):
    """The solver grid cannot resolve the smallest inclusion."""


class GeometryError(CurvedBeamError):
    """Degenerate geometry (zero-length chord, sample outside the grid...)."""


class DimensionError(CurvedBeamError, ValueError):
    """Array shapes are incompatible with the requested operation."""


class SolverError(CurvedBeamError, RuntimeError):
    """The diffusion solve did not reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
