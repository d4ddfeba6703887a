"""Exception hierarchy shared across the toolkit.

The CLI maps these to process exit codes: ConfigError -> 2, DataError -> 3,
GeometryDegeneracyError (and subclasses) -> 4. Plain ValueError from argument
validation is treated as a data problem at the CLI boundary.
"""


class ToolkitError(Exception):
    exit_code = 1


class ConfigError(ToolkitError):
    exit_code = 2


class DataError(ToolkitError):
    exit_code = 3


class GeometryDegeneracyError(ToolkitError):
    exit_code = 4


class DegenerateSegmentError(GeometryDegeneracyError):
    """Segment endpoints coincide; no unique line through them."""


class UnsupportedPoseError(GeometryDegeneracyError):
    """Pose outside the supported range (|pitch| >= 90 deg)."""


class DegeneratePoseError(GeometryDegeneracyError):
    """Zenith incident on the horizon; no consistent camera pose."""


class VerticalHorizonError(GeometryDegeneracyError):
    """Horizon parallel to the image y-axis; no boundary intersections."""


class NoCandidatesError(GeometryDegeneracyError):
    """No usable VP candidate pairs (fewer than two lines, or all coincident)."""


class InsufficientStructureError(GeometryDegeneracyError):
    """Could not select two pseudo VPs. Carries whatever was recovered.

    ``partial`` is a PseudoVPs with ``v1`` set to None (and possibly ``v0``
    too, when not even one consensus point existed).
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
