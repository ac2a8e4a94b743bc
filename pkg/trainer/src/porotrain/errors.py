"""Error taxonomy for the training package."""


class TrainerError(Exception):
    """Base class for every error raised by porotrain."""


class ValidationError(TrainerError):
    """A value violates a documented precondition or invariant."""


class ShapeError(ValidationError):
    """An array has the wrong shape or dimensionality."""


class FormatError(TrainerError):
    """A weights file is malformed, truncated, or corrupt."""


class ExportError(TrainerError):
    """A model cannot be exported faithfully to the portable format."""


class DivergenceError(TrainerError):
    """Training produced a non-finite loss and was aborted."""
