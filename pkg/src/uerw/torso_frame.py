"""Anatomical torso coordinate frame and end-effector construction.

Axes, all unit length and right-handed ``[ML, AP, V]``:

- V: T8 toward T1 (superior positive)
- AP_temp: T8 toward the sternal notch
- ML = normalize(AP_temp x V), positive toward the subject's right
- AP = V x ML, anterior positive

The origin is the midpoint of the sternal notch and T1. Markerless keypoints
substitute "clavicle", "backneck" and "upper back" for the three markers.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import DegenerateGeometryError, MissingLandmarkError, ValidationError
from .trajectory_io import KeypointTrajectory

# |(t1 - t8) x (sternal - t8)| below this (m^2) is treated as collinear
COLLINEAR_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class TorsoFrame:
    origin: np.ndarray
    ml_axis: np.ndarray
    ap_axis: np.ndarray
    v_axis: np.ndarray

    @property
    def basis(self) -> np.ndarray:
        """3x3 matrix whose columns are the ML, AP and V axes."""
        return np.column_stack([self.ml_axis, self.ap_axis, self.v_axis])

    def to_local(self, p) -> np.ndarray:
        return to_local(self, p)


@dataclass(frozen=True)
class FrameLandmarks:
    sternal_notch: np.ndarray
    t1: np.ndarray
    t8: np.ndarray


@dataclass(frozen=True)
class LandmarkMap:
    """Names of the torso and wrist landmarks inside a trajectory."""

    sternal_notch: str = "clavicle"
    t1: str = "backneck"
    t8: str = "upper_back"
    wrist_radial: str = "wrist_radial"
    wrist_ulnar: str = "wrist_ulnar"

    @property
    def torso(self) -> Tuple[str, str, str]:
        return (self.sternal_notch, self.t1, self.t8)

    @property
    def all_names(self) -> Tuple[str, ...]:
        return self.torso + (self.wrist_radial, self.wrist_ulnar)

    def to_dict(self):
        return asdict(self)


KEYPOINT_MAP = LandmarkMap()
MARKER_MAP = LandmarkMap("sternal_notch", "T1", "T8", "radial_styloid", "ulnar_styloid")
PRESETS = {"keypoint": KEYPOINT_MAP, "markerless": KEYPOINT_MAP, "marker": MARKER_MAP}


def resolve_landmark_map(spec) -> LandmarkMap:
    """Accept a preset name, a mapping of fields, a path to JSON, or a LandmarkMap."""
    if spec is None:
        return KEYPOINT_MAP
    if isinstance(spec, LandmarkMap):
        return spec
    if isinstance(spec, dict):
        try:
            return LandmarkMap(**spec)
        except TypeError as exc:
            raise ValidationError(f"bad landmark map: {exc}") from None
    if isinstance(spec, str) and spec in PRESETS:
        return PRESETS[spec]
    with open(spec, "r", encoding="utf-8") as fh:
        return resolve_landmark_map(json.load(fh))


def _frame_arrays(sternal, t1, t8):
    sternal, t1, t8 = (np.asarray(a, dtype=float) for a in (sternal, t1, t8))
    up = t1 - t8
    ap_temp = sternal - t8
    cross = np.cross(ap_temp, up)
    area = np.linalg.norm(cross, axis=-1)
    v = up / np.linalg.norm(up, axis=-1, keepdims=True)
    ml = cross / area[..., None]
    ap = np.cross(v, ml)
    origin = 0.5 * (sternal + t1)
    return origin, ml, ap, v, area


def build_frame(landmarks: FrameLandmarks) -> TorsoFrame:
    """Construct the torso frame from one set of landmarks.

    Raises
    ------
    DegenerateGeometryError
        If the landmarks are coincident or collinear.
    """
    pts = [np.asarray(p, dtype=float) for p in (landmarks.sternal_notch, landmarks.t1, landmarks.t8)]
    if not all(p.shape == (3,) and np.all(np.isfinite(p)) for p in pts):
        raise ValidationError("landmarks must be finite 3D points")
    with np.errstate(invalid="ignore", divide="ignore"):
        origin, ml, ap, v, area = _frame_arrays(*pts)
    if not area > COLLINEAR_TOL:
        raise DegenerateGeometryError(
            f"torso landmarks are collinear or coincident (|cross| = {area:.3g} m^2)"
        )
    return TorsoFrame(origin, ml, ap, v)


def build_frames(sternal, t1, t8):
    """Vectorized frame construction over a trajectory.

    Parameters
    ----------
    sternal, t1, t8 : arrays of shape (T, 3)
        NaN rows are missing.

    Returns
    -------
    origins : (T, 3)
    bases : (T, 3, 3)
        Columns ML, AP, V. Frames with a missing landmark are all-NaN.
    """
    with np.errstate(invalid="ignore", divide="ignore"):
        origin, ml, ap, v, area = _frame_arrays(sternal, t1, t8)
    missing = ~np.isfinite(area)
    degenerate = ~missing & ~(area > COLLINEAR_TOL)
    if degenerate.any():
        raise DegenerateGeometryError(
            f"torso landmarks collinear at frame {int(np.nonzero(degenerate)[0][0])}"
        )
    bases = np.stack([ml, ap, v], axis=-1)
    bases[missing] = np.nan
    origin = origin.copy()
    origin[missing] = np.nan
    return origin, bases


def to_local(frame: TorsoFrame, p) -> np.ndarray:
    """Express world point(s) ``p`` in (ML, AP, V) coordinates."""
    return (np.asarray(p, dtype=float) - frame.origin) @ frame.basis


def to_local_batch(origins, bases, points) -> np.ndarray:
    """Per-frame ``bases[t].T @ (points[t] - origins[t])``; NaN propagates."""
    d = np.asarray(points, dtype=float) - origins
    return np.einsum("tij,ti->tj", bases, d)


def wrist_end_effector(radial, ulnar) -> np.ndarray:
    """Midpoint of the radial and ulnar wrist points; NaN if either is missing."""
    return 0.5 * (np.asarray(radial, dtype=float) + np.asarray(ulnar, dtype=float))


class TorsoFrameTransformer(TransformerMixin, BaseEstimator):
    """Map a keypoint trajectory to the torso-local wrist trajectory.

    Parameters
    ----------
    landmarks : str, dict, LandmarkMap or path, default="keypoint"
        Which trajectory names play the sternal notch, T1, T8 and the two
        wrist roles. ``"marker"`` and ``"keypoint"`` are built in.

    Attributes
    ----------
    landmark_map_ : LandmarkMap
    origins_, bases_ : ndarray
        Frames of the most recent :meth:`transform` call.
    """

    def __init__(self, landmarks="keypoint"):
        self.landmarks = landmarks

    def fit(self, X: KeypointTrajectory, y=None):
        self.landmark_map_ = resolve_landmark_map(self.landmarks)
        self._check_names(X)
        return self

    def _check_names(self, X):
        for name in self.landmark_map_.all_names:
            if name not in X.names:
                raise MissingLandmarkError(f"trajectory lacks landmark {name!r}")

    def frames(self, X: KeypointTrajectory):
        m = self.landmark_map_
        self._check_names(X)
        return build_frames(X.keypoint(m.sternal_notch), X.keypoint(m.t1), X.keypoint(m.t8))

    def transform(self, X: KeypointTrajectory) -> np.ndarray:
        """Torso-local wrist positions, shape (T, 3); NaN for unusable frames."""
        if not hasattr(self, "landmark_map_"):
            self.fit(X)
        m = self.landmark_map_
        self.origins_, self.bases_ = self.frames(X)
        wrist = wrist_end_effector(X.keypoint(m.wrist_radial), X.keypoint(m.wrist_ulnar))
        return to_local_batch(self.origins_, self.bases_, wrist)
