"""Pinhole camera without distortion.

World points map to camera coordinates as ``X = R p + t`` (x right, y down,
z forward) and to pixels as ``u = (fx X/Z + cx, fy Y/Z + cy)``.

Camera config files are JSON::

    {"cameras": [
      {"name": "frontal",
       "intrinsics": {"fx": 1400, "fy": 1400, "cx": 960, "cy": 540,
                      "width": 1920, "height": 1080},
       "study_pose": {"kind": "frontal", "subject_origin": [0, 0, 1.4],
                      "distance": 3.0, "elevation": 20.0}},
      {"name": "custom",
       "intrinsics": {...},
       "pose": {"rotation": [[1,0,0],[0,1,0],[0,0,1]], "translation": [0,0,0]}}
    ]}

Distances are meters, angles degrees, intrinsics pixels. ``rotation`` and
``translation`` are the world-to-camera transform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .exceptions import BehindCameraError, ValidationError

DEFAULT_INTRINSICS = {"fx": 1400.0, "fy": 1400.0, "cx": 960.0, "cy": 540.0, "width": 1920, "height": 1080}
DEFAULT_DISTANCE = 3.0
DEFAULT_ELEVATION = 20.0
OFFSET_AZIMUTH = 45.0
# subject-frame directions used by study poses in world coordinates
ANTERIOR = (0.0, 1.0, 0.0)
UP = (0.0, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    width: int = 1920
    height: int = 1080
    name: str = "camera"

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError("focal lengths must be positive")
        R = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float).reshape(3)
        if R.shape != (3, 3):
            raise ValidationError("rotation must be 3x3")
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-10, rtol=0) or abs(np.linalg.det(R) - 1) > 1e-10:
            raise ValidationError("rotation must be orthonormal with det +1")
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    @property
    def optical_axis(self) -> np.ndarray:
        return self.rotation[2].copy()

    def to_camera(self, p) -> np.ndarray:
        return np.asarray(p, dtype=float) @ self.rotation.T + self.translation

    def project(self, p_world) -> np.ndarray:
        return project(self, p_world)

    def project_points(self, points) -> Tuple[np.ndarray, np.ndarray]:
        return project_points(self, points)

    def ray_directions(self, points) -> np.ndarray:
        """Unit vectors from the camera center toward each point."""
        d = np.asarray(points, dtype=float) - self.center
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "intrinsics": {
                "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height,
            },
            "pose": {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()},
        }


def project(cam: CameraModel, p_world) -> np.ndarray:
    """Pixel coordinates of one world point.

    Raises
    ------
    BehindCameraError
        If the point's camera-frame depth is not positive.
    """
    X, Y, Z = cam.to_camera(p_world)
    if not Z > 0:
        raise BehindCameraError(f"point has depth {Z:.6g} m in camera {cam.name!r}")
    return np.array([cam.fx * X / Z + cam.cx, cam.fy * Y / Z + cam.cy])


def project_points(cam: CameraModel, points) -> Tuple[np.ndarray, np.ndarray]:
    """Project (..., 3) world points.

    Returns pixels (..., 2) and a validity mask; points with non-positive
    depth (or NaN input) are NaN and flagged invalid instead of raising.
    """
    P = cam.to_camera(points)
    Z = P[..., 2]
    valid = Z > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        uv = np.stack([cam.fx * P[..., 0] / Z + cam.cx, cam.fy * P[..., 1] / Z + cam.cy], axis=-1)
    uv[~valid] = np.nan
    return uv, valid


def look_at(center, target, up=UP, **intrinsics) -> CameraModel:
    """Camera at ``center`` whose optical axis passes through ``target``."""
    center = np.asarray(center, dtype=float)
    forward = np.asarray(target, dtype=float) - center
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype=float))
    norm = np.linalg.norm(right)
    if norm < 1e-9:
        raise ValidationError("optical axis parallel to the up vector")
    right /= norm
    down = np.cross(forward, right)
    R = np.stack([right, down, forward])
    params = {**DEFAULT_INTRINSICS, **intrinsics}
    return CameraModel(rotation=R, translation=-R @ center, **params)


def study_pose(
    kind: str,
    subject_origin,
    distance: float = DEFAULT_DISTANCE,
    elevation: float = DEFAULT_ELEVATION,
    anterior=ANTERIOR,
    up=UP,
    **intrinsics,
) -> CameraModel:
    """Frontal or 45-degree offset camera aimed at ``subject_origin``.

    The frontal camera sits ``distance`` meters from the subject along the
    anterior direction tilted ``elevation`` degrees upward. The offset camera
    is the frontal pose swung 45 degrees about the vertical toward the
    subject's right.
    """
    if not distance > 0:
        raise ValidationError("distance must be positive")
    anterior = np.asarray(anterior, dtype=float)
    up = np.asarray(up, dtype=float)
    anterior = anterior / np.linalg.norm(anterior)
    up = up / np.linalg.norm(up)
    right = np.cross(anterior, up)
    if kind == "frontal":
        azimuth = 0.0
    elif kind == "offset":
        azimuth = math.radians(OFFSET_AZIMUTH)
    else:
        raise ValidationError(f"unknown study pose {kind!r}; expected 'frontal' or 'offset'")
    horizontal = math.cos(azimuth) * anterior + math.sin(azimuth) * right
    el = math.radians(elevation)
    direction = math.cos(el) * horizontal + math.sin(el) * up
    origin = np.asarray(subject_origin, dtype=float)
    intrinsics.setdefault("name", kind)
    return look_at(origin + distance * direction, origin, up=up, **intrinsics)


def camera_from_dict(spec: dict, name: Optional[str] = None) -> CameraModel:
    intr = {**DEFAULT_INTRINSICS, **spec.get("intrinsics", {})}
    name = spec.get("name", name or "camera")
    if "pose" in spec:
        pose = spec["pose"]
        return CameraModel(rotation=pose["rotation"], translation=pose["translation"], name=name, **intr)
    sp = dict(spec.get("study_pose", {"kind": "frontal"}))
    kind = sp.pop("kind", "frontal")
    origin = sp.pop("subject_origin", [0.0, 0.0, 0.0])
    try:
        return study_pose(kind, origin, name=name, **sp, **intr)
    except TypeError as exc:
        raise ValidationError(f"bad study_pose for camera {name!r}: {exc}") from None


def load_cameras(path) -> Dict[str, CameraModel]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return cameras_from_config(data)


def cameras_from_config(data) -> Dict[str, CameraModel]:
    if isinstance(data, dict) and "cameras" in data:
        data = data["cameras"]
    if isinstance(data, dict):
        data = [data]
    cams = {}
    for i, spec in enumerate(data):
        cam = camera_from_dict(spec, name=f"camera{i}")
        if cam.name in cams:
            raise ValidationError(f"duplicate camera name {cam.name!r}")
        cams[cam.name] = cam
    return cams


def save_cameras(cameras, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"cameras": [c.to_dict() for c in cameras.values()]}, fh, indent=2, sort_keys=True)
        fh.write("\n")
