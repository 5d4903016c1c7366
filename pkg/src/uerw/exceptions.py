"""Exception types raised by uerw.

All data-validation failures derive from :class:`ValidationError` so the CLI
can map them to a single exit status.
"""


class ValidationError(ValueError):
    """Input data or configuration failed validation."""


class TrajectoryFormatError(ValidationError):
    """A trajectory file could not be parsed or violates an invariant."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class DegenerateGeometryError(ValidationError):
    """Landmarks are coincident or collinear."""


class BehindCameraError(ValidationError):
    """A point has non-positive depth in camera coordinates."""


class SkeletonSpecError(ValidationError):
    """A skeleton specification is malformed."""


class JointLimitError(ValidationError):
    """A joint angle lies outside its limits."""

    def __init__(self, joint, value, lo, hi, dof=None):
        self.joint = joint
        self.dof = dof
        which = f"joint {joint!r}" if dof is None else f"joint {joint!r} ({dof})"
        super().__init__(f"{which} angle {value:.6g} outside [{lo:.6g}, {hi:.6g}]")


class ScriptError(ValidationError):
    """A synthetic trial script cannot be realized."""


class MissingLandmarkError(ValidationError):
    """A required landmark or keypoint is absent from a trajectory."""


class NumericalError(FloatingPointError):
    """An optimization produced a non-finite value."""

    def __init__(self, message, iteration=None, term=None):
        self.iteration = iteration
        self.term = term
        super().__init__(message)
