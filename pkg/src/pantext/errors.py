"""Exception hierarchy shared by every module."""


class PanTextError(Exception):
    """Base class for all package errors."""


class ShapeError(PanTextError, ValueError):
    """A tensor or array has the wrong shape.

    ``dim`` names the offending dimension (e.g. ``"channels"``).
    """

    def __init__(self, message, dim=None):
        super().__init__(message)
        self.dim = dim


class GeometryError(PanTextError, ValueError):
    """Degenerate rectangle, zero-area or non-convex quadrilateral."""


class FormatError(PanTextError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, line=None, path=None):
        loc = ""
        if path is not None:
            loc += f"{path}:"
        if line is not None:
            loc += f"{line}:"
        super().__init__(f"{loc} {message}" if loc else message)
        self.line = line
        self.path = path


class WeightsError(PanTextError, ValueError):
    """Weights container missing a layer or holding a wrong shape."""


class PipelineError(PanTextError):
    """An inference stage failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
