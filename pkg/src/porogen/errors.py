"""Exception hierarchy shared by all porogen modules.

Every error raised on a documented failure path derives from
:class:`PorogenError`, so the CLI can map failures to structured JSON
with a stable ``type`` field.
"""


class PorogenError(Exception):
    """Base class for all porogen errors."""


class DimensionError(PorogenError):
    """Volume size on disk does not match the declared dimensions."""


class VolumeIOError(PorogenError):
    """File missing or unreadable."""


class DegenerateHistogramError(PorogenError):
    """Single-valued image: no threshold separates two classes."""


class CapacityError(PorogenError):
    """Requested sub-domain count exceeds what the volume can hold."""


class RangeError(PorogenError):
    """Lag or index outside the valid range for the image extent."""


class ShapeError(PorogenError):
    """Incompatible array shapes, channels, or mismatched grids."""


class FormatError(PorogenError):
    """Weights file violates the portable binary format."""


class NumericError(PorogenError):
    """Parameters would produce non-finite arithmetic."""


class NoFlowError(PorogenError):
    """No pore path percolates between inlet and outlet; flow is zero."""


class ConvergenceError(PorogenError):
    """Iterative solver hit its iteration cap before the tolerances."""

    def __init__(self, message, iterations=None, flux_change=None, max_divergence=None):
        super().__init__(message)
        self.iterations = iterations
        self.flux_change = flux_change
        self.max_divergence = max_divergence


class ValidationError(PorogenError):
    """Input violates an operation precondition."""
