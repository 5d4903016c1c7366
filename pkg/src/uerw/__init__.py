"""Upper-extremity reachable workspace scoring and implicit trajectory fitting."""

__version__ = "0.1.0"

from .camera import CameraModel, look_at, study_pose
from .exceptions import (
    BehindCameraError,
    DegenerateGeometryError,
    JointLimitError,
    MissingLandmarkError,
    NumericalError,
    ScriptError,
    SkeletonSpecError,
    TrajectoryFormatError,
    ValidationError,
)
from .torso_frame import TorsoFrameTransformer, build_frame, build_frames
from .trajectory_io import KeypointTrajectory, PixelTrajectory, load_trajectory, save_trajectory
from .workspace import ANALYZED_OCTANTS, Octant, WorkspaceScorer, classify_octant, generate_targets

__all__ = [
    "ANALYZED_OCTANTS",
    "BehindCameraError",
    "CameraModel",
    "DegenerateGeometryError",
    "JointLimitError",
    "KeypointTrajectory",
    "MissingLandmarkError",
    "NumericalError",
    "Octant",
    "PixelTrajectory",
    "ScriptError",
    "SkeletonSpecError",
    "TorsoFrameTransformer",
    "TrajectoryFormatError",
    "ValidationError",
    "WorkspaceScorer",
    "build_frame",
    "build_frames",
    "classify_octant",
    "generate_targets",
    "load_trajectory",
    "look_at",
    "save_trajectory",
    "study_pose",
]
