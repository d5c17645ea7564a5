"""Exception types shared across the package."""


class VoxwaveError(Exception):
    """Base class for all package-specific errors."""


class VolumeFormatError(VoxwaveError):
    """Raised when a VXL1 / HIER1 / PYR1 stream cannot be parsed."""


class StructuralError(VoxwaveError):
    """Raised when two objects that must share structure do not.

    Examples: a volume whose domain differs from the hierarchy's, a
    pyramid whose layout does not match the transform, operator shapes
    that disagree.
    """


class DegenerateVarianceError(VoxwaveError):
    """Raised when a variance estimate is exactly zero and a t-statistic
    cannot be formed."""
