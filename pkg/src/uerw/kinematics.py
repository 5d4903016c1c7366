"""Rigid-body forward kinematics ``x = M(theta, beta)`` over a skeleton tree.

The pose vector ``theta`` is laid out as::

    [root_tx, root_ty, root_tz, root_rz, root_rx, root_ry, joint angles...]

Root rotation is an intrinsic Z-X-Y sequence. Each non-root joint applies its
axis rotations in file order (intrinsic). ``beta`` holds one positive scale
per scale group plus a 3D offset per keypoint. A segment's rest offset is
scaled by its parent's group (it is the parent's geometry); a keypoint's rest
position is scaled by its own segment's group; keypoint offsets are never
scaled.

The same code runs on torch tensors (autograd, used by the fitter) and on
numpy arrays (cheap single-pose evaluation for IK and data synthesis).
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from .exceptions import JointLimitError, SkeletonSpecError

ROOT_DOFS = ("root_tx", "root_ty", "root_tz", "root_rz", "root_rx", "root_ry")
ROOT_AXES = ((0.0, 0.0, 1.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0))
DEFAULT_SKELETON = "torso_right_arm.json"


@dataclass(frozen=True)
class Segment:
    name: str
    parent: Optional[str]
    offset: Tuple[float, float, float]
    scale_group: int


@dataclass(frozen=True)
class Joint:
    name: str
    segment: str
    axes: Tuple[Tuple[float, float, float], ...]
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    dof_names: Tuple[str, ...]


@dataclass(frozen=True)
class KeypointDef:
    name: str
    segment: str
    position: Tuple[float, float, float]


@dataclass(frozen=True)
class SkeletonSpec:
    """Validated skeleton. Segments are stored parents-first."""

    name: str
    segments: Tuple[Segment, ...]
    joints: Tuple[Joint, ...]
    keypoints: Tuple[KeypointDef, ...]
    scale_groups: Tuple[str, ...]
    scale_range: Tuple[float, float] = (0.5, 2.0)

    @property
    def n_dof(self) -> int:
        return len(ROOT_DOFS) + sum(len(j.axes) for j in self.joints)

    @property
    def dof_names(self) -> Tuple[str, ...]:
        return ROOT_DOFS + tuple(n for j in self.joints for n in j.dof_names)

    @property
    def keypoint_names(self) -> Tuple[str, ...]:
        return tuple(k.name for k in self.keypoints)

    @property
    def n_keypoints(self) -> int:
        return len(self.keypoints)

    @property
    def n_scale_groups(self) -> int:
        return len(self.scale_groups)

    @property
    def lower(self) -> np.ndarray:
        lo = [-math.inf] * len(ROOT_DOFS)
        for j in self.joints:
            lo.extend(j.lower)
        return np.array(lo)

    @property
    def upper(self) -> np.ndarray:
        hi = [math.inf] * len(ROOT_DOFS)
        for j in self.joints:
            hi.extend(j.upper)
        return np.array(hi)

    @property
    def limited(self) -> np.ndarray:
        """Mask of DoFs with finite joint limits (all non-root angles)."""
        return np.isfinite(self.lower)

    def dof_index(self, name: str) -> int:
        return self.dof_names.index(name)

    def joint_of_dof(self, i: int) -> str:
        if i < len(ROOT_DOFS):
            return "root"
        i -= len(ROOT_DOFS)
        for j in self.joints:
            if i < len(j.axes):
                return j.name
            i -= len(j.axes)
        raise IndexError(i)


@dataclass
class Pose:
    """Root translation (m), root rotation (rad) and joint angles (rad)."""

    root_translation: np.ndarray
    root_rotation: np.ndarray
    angles: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.root_translation, self.root_rotation, self.angles]).astype(float)

    @classmethod
    def from_vector(cls, theta) -> "Pose":
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:3].copy(), theta[3:6].copy(), theta[6:].copy())


@dataclass
class BodyParams:
    """Per-group segment scales and per-keypoint offsets (segment-local, m)."""

    scales: np.ndarray
    offsets: np.ndarray

    @classmethod
    def identity(cls, spec: SkeletonSpec) -> "BodyParams":
        return cls(np.ones(spec.n_scale_groups), np.zeros((spec.n_keypoints, 3)))

    def validate(self, spec: SkeletonSpec) -> None:
        s = np.asarray(self.scales, dtype=float)
        o = np.asarray(self.offsets, dtype=float)
        if s.shape != (spec.n_scale_groups,):
            raise SkeletonSpecError(f"expected {spec.n_scale_groups} scales, got {s.shape}")
        if o.shape != (spec.n_keypoints, 3):
            raise SkeletonSpecError(f"expected offsets of shape {(spec.n_keypoints, 3)}, got {o.shape}")
        lo, hi = spec.scale_range
        if np.any((s < lo) | (s > hi)) or not np.all(np.isfinite(o)):
            raise SkeletonSpecError(f"scales must lie in [{lo}, {hi}] and offsets be finite")


def _vec3(value, what) -> Tuple[float, float, float]:
    try:
        v = tuple(float(x) for x in value)
    except (TypeError, ValueError):
        raise SkeletonSpecError(f"{what} must be three numbers") from None
    if len(v) != 3 or not all(math.isfinite(x) for x in v):
        raise SkeletonSpecError(f"{what} must be three finite numbers")
    return v


def skeleton_from_dict(data: dict) -> SkeletonSpec:
    """Validate a skeleton mapping (see ``data/torso_right_arm.json``).

    Raises
    ------
    SkeletonSpecError
        On duplicate names, missing parents, cycles, a missing or multiple
        root, degenerate axes, or inverted limits.
    """
    groups = tuple(data.get("scale_groups", ()))
    scale_range = tuple(float(x) for x in data.get("scale_range", (0.5, 2.0)))
    if len(scale_range) != 2 or not 0 < scale_range[0] < scale_range[1]:
        raise SkeletonSpecError("scale_range must be [lo, hi] with 0 < lo < hi")

    raw_segments = data.get("segments", [])
    by_name: Dict[str, Segment] = {}
    for s in raw_segments:
        name = s["name"]
        if name in by_name:
            raise SkeletonSpecError(f"duplicate segment {name!r}")
        group = s.get("scale_group", name)
        if isinstance(group, str):
            if group not in groups:
                groups = groups + (group,)
            group = groups.index(group)
        if not 0 <= int(group) < len(groups):
            raise SkeletonSpecError(f"segment {name!r} has unknown scale group {group}")
        by_name[name] = Segment(name, s.get("parent"), _vec3(s.get("offset", (0, 0, 0)), f"offset of {name!r}"), int(group))

    roots = [s for s in by_name.values() if s.parent is None]
    if len(roots) != 1:
        raise SkeletonSpecError(f"skeleton needs exactly one root segment, found {len(roots)}")
    for s in by_name.values():
        if s.parent == s.name:
            raise SkeletonSpecError(f"segment {s.name!r} is its own parent (cycle)")
        if s.parent is not None and s.parent not in by_name:
            raise SkeletonSpecError(f"segment {s.name!r} has missing parent {s.parent!r}")

    # parents-first ordering; anything left over sits on a cycle
    ordered: List[Segment] = []
    placed = set()
    pending = list(by_name.values())
    while pending:
        ready = [s for s in pending if s.parent is None or s.parent in placed]
        if not ready:
            raise SkeletonSpecError(f"cycle among segments {sorted(s.name for s in pending)}")
        for s in ready:
            ordered.append(s)
            placed.add(s.name)
        pending = [s for s in pending if s.name not in placed]
    root = ordered[0]

    joints = []
    has_free_root = False
    seen_segments = set()
    for j in data.get("joints", []):
        name, seg = j["name"], j["segment"]
        if seg not in by_name:
            raise SkeletonSpecError(f"joint {name!r} on unknown segment {seg!r}")
        if seg in seen_segments:
            raise SkeletonSpecError(f"segment {seg!r} has more than one joint")
        seen_segments.add(seg)
        if j.get("type") == "free":
            if seg != root.name:
                raise SkeletonSpecError(f"free joint {name!r} must sit on the root segment")
            has_free_root = True
            continue
        if seg == root.name:
            raise SkeletonSpecError("the root segment only takes a free joint")
        axes = j.get("axes", [])
        limits = j.get("limits", [])
        if not 1 <= len(axes) <= 3:
            raise SkeletonSpecError(f"joint {name!r} must have 1 to 3 axes")
        if len(limits) != len(axes):
            raise SkeletonSpecError(f"joint {name!r} needs one [lo, hi] limit per axis")
        unit_axes = []
        for a in axes:
            v = np.array(_vec3(a, f"axis of joint {name!r}"))
            n = np.linalg.norm(v)
            if n < 1e-9:
                raise SkeletonSpecError(f"joint {name!r} has a degenerate (zero) axis")
            unit_axes.append(tuple(v / n))
        lower, upper = [], []
        for lo, hi in limits:
            lo, hi = float(lo), float(hi)
            if not lo < hi:
                raise SkeletonSpecError(f"joint {name!r} has limit lo >= hi ({lo} >= {hi})")
            lower.append(lo)
            upper.append(hi)
        dof_names = tuple(j.get("dof_names", [f"{name}_{i}" for i in range(len(axes))]))
        if len(dof_names) != len(axes):
            raise SkeletonSpecError(f"joint {name!r} needs one dof name per axis")
        joints.append(Joint(name, seg, tuple(unit_axes), tuple(lower), tuple(upper), dof_names))
    if not has_free_root:
        raise SkeletonSpecError("the root segment needs a 6-DoF free joint")

    # joints follow segment order so the DoF layout is a pure function of the tree
    order = {s.name: i for i, s in enumerate(ordered)}
    joints.sort(key=lambda jt: order[jt.segment])

    keypoints = []
    for k in data.get("keypoints", []):
        if k["segment"] not in by_name:
            raise SkeletonSpecError(f"keypoint {k['name']!r} on unknown segment {k['segment']!r}")
        keypoints.append(KeypointDef(k["name"], k["segment"], _vec3(k.get("position", (0, 0, 0)), f"keypoint {k['name']!r}")))
    names = [k.name for k in keypoints]
    if len(set(names)) != len(names):
        raise SkeletonSpecError("duplicate keypoint names")

    spec = SkeletonSpec(data.get("name", "skeleton"), tuple(ordered), tuple(joints), tuple(keypoints), groups, scale_range)
    dofs = spec.dof_names
    if len(set(dofs)) != len(dofs):
        raise SkeletonSpecError("duplicate DoF names")
    return spec


def load_skeleton(path=None) -> SkeletonSpec:
    """Load a skeleton JSON file; ``None`` loads the shipped torso + right arm."""
    if path is None:
        text = resources.files("uerw").joinpath("data").joinpath(DEFAULT_SKELETON).read_text(encoding="utf-8")
        return skeleton_from_dict(json.loads(text))
    with open(path, "r", encoding="utf-8") as fh:
        return skeleton_from_dict(json.load(fh))


def _generator(axis) -> Tuple[np.ndarray, np.ndarray]:
    x, y, z = axis
    K = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return K, K @ K


def axis_angle_matrix(axis, angle):
    """Rodrigues rotation for a fixed unit axis and a batch of angles -> (..., 3, 3).

    ``angle`` may be a numpy array or a torch tensor; the result matches it.
    """
    K, K2 = _generator(np.asarray(axis, dtype=float))
    if isinstance(angle, torch.Tensor):
        K, K2 = torch.as_tensor(K, dtype=angle.dtype), torch.as_tensor(K2, dtype=angle.dtype)
        return _rodrigues(K, K2, angle, torch)
    return _rodrigues(K, K2, np.asarray(angle, dtype=float), np)


def _rodrigues(K, K2, angle, lib):
    s = lib.sin(angle)[..., None, None]
    c = lib.cos(angle)[..., None, None]
    return s * K + (1.0 - c) * K2 + _eye(lib, K)


def _eye(lib, like):
    if lib is torch:
        return torch.eye(3, dtype=like.dtype)
    return np.eye(3)


class KinematicModel:
    """Forward kinematics for one :class:`SkeletonSpec`.

    Calling the model with torch tensors keeps the autograd graph; calling
    it with numpy arrays takes a plain numpy path that is much cheaper for
    small batches (inverse kinematics, data synthesis).
    """

    def __init__(self, spec: SkeletonSpec):
        self.spec = spec
        self._seg_index = {s.name: i for i, s in enumerate(spec.segments)}
        self._parent = [None if s.parent is None else self._seg_index[s.parent] for s in spec.segments]
        self._offsets = np.array([s.offset for s in spec.segments])
        self._parent_group = [
            None if s.parent is None else spec.segments[self._seg_index[s.parent]].scale_group
            for s in spec.segments
        ]
        # per segment: list of (dof index, K, K^2)
        self._rotations: List[List[Tuple[int, np.ndarray, np.ndarray]]] = []
        joint_start = {}
        start = len(ROOT_DOFS)
        for j in spec.joints:
            joint_start[j.segment] = (start, j.axes)
            start += len(j.axes)
        for seg in spec.segments:
            if seg.parent is None:
                axes = [(3 + k, a) for k, a in enumerate(ROOT_AXES)]
            elif seg.name in joint_start:
                s0, ax = joint_start[seg.name]
                axes = [(s0 + k, a) for k, a in enumerate(ax)]
            else:
                axes = []
            self._rotations.append([(i, *_generator(np.asarray(a, dtype=float))) for i, a in axes])
        kp_seg = [self._seg_index[k.segment] for k in spec.keypoints]
        self._kp_seg = np.array(kp_seg, dtype=np.int64)
        self._kp_group = np.array([spec.segments[i].scale_group for i in kp_seg], dtype=np.int64)
        self._kp_rest = np.array([k.position for k in spec.keypoints], dtype=float).reshape(-1, 3)
        self._torch_cache = {}

    def _constants(self, lib, dtype=None):
        if lib is np:
            return self._offsets, self._rotations, self._kp_seg, self._kp_group, self._kp_rest
        key = dtype
        if key not in self._torch_cache:
            t = lambda a: torch.as_tensor(a, dtype=dtype)
            rots = [[(i, t(K), t(K2)) for i, K, K2 in seg] for seg in self._rotations]
            self._torch_cache[key] = (
                t(self._offsets), rots,
                torch.as_tensor(self._kp_seg), torch.as_tensor(self._kp_group), t(self._kp_rest),
            )
        return self._torch_cache[key]

    def segment_transforms(self, theta, scales):
        """World rotations (B, S, 3, 3) and positions (B, S, 3) of every segment."""
        lib = torch if isinstance(theta, torch.Tensor) else np
        offsets, rotations, _, _, _ = self._constants(lib, getattr(theta, "dtype", None))
        rots, poss = [], []
        for i, seg in enumerate(self.spec.segments):
            pi = self._parent[i]
            if pi is None:
                R = None
                p = theta[..., 0:3]
            else:
                R = rots[pi]
                p = poss[pi] + (R @ (scales[self._parent_group[i]] * offsets[i])[..., None])[..., 0]
            for dof, K, K2 in rotations[i]:
                Rk = _rodrigues(K, K2, theta[..., dof], lib)
                R = Rk if R is None else R @ Rk
            rots.append(R)
            poss.append(p)
        if lib is torch:
            return torch.stack(rots, dim=-3), torch.stack(poss, dim=-2)
        return np.stack(rots, axis=-3), np.stack(poss, axis=-2)

    def __call__(self, theta, scales, offsets):
        """Keypoint positions (..., K, 3) for poses ``theta`` of shape (..., D)."""
        lib = torch if isinstance(theta, torch.Tensor) else np
        _, _, kp_seg, kp_group, kp_rest = self._constants(lib, getattr(theta, "dtype", None))
        R, p = self.segment_transforms(theta, scales)
        local = scales[kp_group][:, None] * kp_rest + offsets
        Rk = R[..., kp_seg, :, :]
        pk = p[..., kp_seg, :]
        return pk + (Rk @ local[..., None])[..., 0]


@functools.lru_cache(maxsize=32)
def kinematic_model(spec: SkeletonSpec) -> KinematicModel:
    return KinematicModel(spec)


def check_limits(spec: SkeletonSpec, theta, tol: float = 0.0) -> None:
    """Raise :class:`JointLimitError` naming the first out-of-limit joint."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    lo, hi = spec.lower, spec.upper
    bad = (theta < lo - tol) | (theta > hi + tol)
    if bad.any():
        row, i = np.argwhere(bad)[0]
        raise JointLimitError(spec.joint_of_dof(i), float(theta[row, i]), lo[i], hi[i], dof=spec.dof_names[i])


def forward(
    spec: SkeletonSpec,
    theta: Union[Pose, np.ndarray],
    beta: Optional[BodyParams] = None,
    strict: bool = False,
) -> np.ndarray:
    """Keypoint positions for one pose (K, 3) or a batch of poses (B, K, 3).

    Parameters
    ----------
    theta : Pose or array of shape (D,) or (B, D)
    beta : BodyParams, optional
        Identity body when omitted.
    strict : bool
        Raise :class:`JointLimitError` for angles outside their limits.
    """
    if isinstance(theta, Pose):
        theta = theta.as_vector()
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != spec.n_dof:
        raise SkeletonSpecError(f"expected {spec.n_dof} DoFs, got {theta.shape[-1]}")
    if strict:
        check_limits(spec, theta)
    beta = BodyParams.identity(spec) if beta is None else beta
    beta.validate(spec)
    model = kinematic_model(spec)
    return model(theta, np.asarray(beta.scales, dtype=float), np.asarray(beta.offsets, dtype=float))


def rest_pose(spec: SkeletonSpec) -> np.ndarray:
    """Zero root, joint angles at zero clipped into their limits."""
    theta = np.zeros(spec.n_dof)
    return np.clip(theta, spec.lower, spec.upper)
