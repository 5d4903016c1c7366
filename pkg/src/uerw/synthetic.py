"""Synthetic ground-truth reach trials and an independent brute-force scorer.

Two generators share one script format:

- ``mode="arm"`` drives the skeleton: each directive contributes waypoints
  solved by inverse kinematics that points the wrist along random directions
  inside the directive's octant (a few fresh directions are tried before a
  directive is declared unreachable), joined by shape-preserving cubic (PCHIP) interpolation in joint space, so
  every interpolated angle stays within its limits.
- ``mode="shell"`` places the wrist directly on a sphere around the torso
  origin and rasters each directive's octant patch, giving dense coverage for
  scoring tests that a real arm cannot reach.

Noise is applied to copies; clean streams are never modified.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import least_squares

from .camera import CameraModel, project_points
from .exceptions import ScriptError, ValidationError
from .kinematics import BodyParams, SkeletonSpec, forward, kinematic_model
from .torso_frame import KEYPOINT_MAP, FrameLandmarks, LandmarkMap, build_frame, TorsoFrameTransformer, build_frames
from .trajectory_io import KeypointTrajectory, PixelTrajectory
from .workspace import ANALYZED_OCTANTS, Octant, TargetSphere, octant_codes

SUBJECT_ROOT = (0.0, 0.0, 1.4)
# keep IK solutions this fraction of each joint range away from the limits
LIMIT_MARGIN = 0.08
# angular inset (rad) of waypoints from octant boundary planes
OCTANT_MARGIN = math.radians(12.0)
# fresh random targets tried per waypoint before a directive counts as unreachable
IK_ATTEMPTS = 4


@dataclass(frozen=True)
class ReachDirective:
    octant: Octant
    density: int = 3
    duration: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "octant", _octant(self.octant))
        if self.density < 1:
            raise ValidationError("directive density must be >= 1")
        if not self.duration > 0:
            raise ValidationError("directive duration must be positive")


@dataclass(frozen=True)
class NoiseSpec:
    sigma_3d: float = 0.0
    sigma_px: float = 0.0
    sigma_depth: Mapping[str, float] = field(default_factory=dict)
    dropout: float = 0.0

    def __post_init__(self):
        if self.sigma_3d < 0 or self.sigma_px < 0 or any(v < 0 for v in self.sigma_depth.values()):
            raise ValidationError("noise sigmas must be non-negative")
        if not 0 <= self.dropout < 1:
            raise ValidationError("dropout must lie in [0, 1)")

    @property
    def is_zero(self) -> bool:
        return (
            self.sigma_3d == 0 and self.sigma_px == 0 and self.dropout == 0
            and all(v == 0 for v in self.sigma_depth.values())
        )


@dataclass(frozen=True)
class TrialScript:
    directives: Sequence[ReachDirective]
    noise: NoiseSpec = NoiseSpec()
    seed: int = 0
    frame_rate: float = 60.0
    mode: str = "arm"
    shell_radius: float = 0.65
    sway: float = 0.01

    def __post_init__(self):
        if not self.directives:
            raise ValidationError("script needs at least one directive")
        if self.mode not in ("arm", "shell"):
            raise ValidationError(f"unknown script mode {self.mode!r}")
        if not self.frame_rate > 0 or not self.shell_radius > 0 or self.sway < 0:
            raise ValidationError("frame_rate and shell_radius must be positive, sway non-negative")
        object.__setattr__(self, "directives", tuple(self.directives))

    @property
    def duration(self) -> float:
        return sum(d.duration for d in self.directives)

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrialScript":
        data = dict(data)
        directives = [ReachDirective(**d) for d in data.pop("directives", [])]
        noise = NoiseSpec(**data.pop("noise", {}))
        try:
            return cls(directives=directives, noise=noise, **data)
        except TypeError as exc:
            raise ValidationError(f"bad trial script: {exc}") from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["directives"] = [
            {"octant": r.octant.label, "density": r.density, "duration": r.duration} for r in self.directives
        ]
        d["noise"]["sigma_depth"] = dict(self.noise.sigma_depth)
        return d


def load_script(path) -> TrialScript:
    with open(path, "r", encoding="utf-8") as fh:
        return TrialScript.from_dict(json.load(fh))


def _octant(value) -> Octant:
    if isinstance(value, Octant):
        return value
    if isinstance(value, str):
        try:
            return Octant.from_label(value)
        except ValueError:
            return Octant[value.upper().replace(".", "").replace(" ", "_")]
    return Octant(int(value))


@dataclass
class SyntheticTrial:
    """Ground truth plus clean and noisy observation streams of one trial."""

    script: TrialScript
    poses: Optional[np.ndarray]
    clean: KeypointTrajectory
    pixels: Dict[str, PixelTrajectory]
    noisy: KeypointTrajectory
    noisy_pixels: Dict[str, PixelTrajectory]
    body: Optional[BodyParams] = None

    @property
    def timestamps(self) -> np.ndarray:
        return self.clean.timestamps

    def wrist_local(self, noisy: bool = False, landmarks: LandmarkMap = KEYPOINT_MAP) -> np.ndarray:
        traj = self.noisy if noisy else self.clean
        return TorsoFrameTransformer(landmarks).fit(traj).transform(traj)


# ---------------------------------------------------------------------------
# geometry helpers


def octant_direction(octant: Octant, rng: np.random.Generator, margin: float = OCTANT_MARGIN) -> np.ndarray:
    """Random unit vector strictly inside ``octant`` (at least ``margin`` rad from its planes)."""
    az = rng.uniform(margin, math.pi / 2 - margin)
    el = rng.uniform(margin, math.pi / 2 - margin)
    v = np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])
    return v * np.array([octant.ml_sign, octant.ap_sign, octant.v_sign])


def _root_motion(t: np.ndarray, sway: float, rng: np.random.Generator) -> np.ndarray:
    """Small smooth trunk sway: (T, 6) root translation and rotation."""
    root = np.zeros((t.size, 6))
    root[:, :3] = SUBJECT_ROOT
    if sway > 0:
        phase = rng.uniform(0, 2 * math.pi, size=6)
        freq = rng.uniform(0.1, 0.3, size=6)
        amp = np.array([sway] * 3 + [sway * 3.0] * 3)
        root += amp * np.sin(2 * math.pi * freq * t[:, None] + phase)
    return root


# ---------------------------------------------------------------------------
# arm-mode generation


class _WristIK:
    def __init__(self, spec: SkeletonSpec, landmarks: LandmarkMap):
        self.spec = spec
        self.model = kinematic_model(spec)
        names = spec.keypoint_names
        try:
            self.k_rad = names.index(landmarks.wrist_radial)
            self.k_uln = names.index(landmarks.wrist_ulnar)
            self.k_torso = [names.index(n) for n in landmarks.torso]
        except ValueError as exc:
            raise ScriptError(f"skeleton lacks a landmark used for scoring: {exc}") from None
        arm = ("sc_elevation", "sc_protraction", "shoulder_flexion", "shoulder_adduction", "shoulder_rotation")
        self.free = [spec.dof_index(n) for n in arm if n in spec.dof_names]
        if len(self.free) < 3:
            raise ScriptError("skeleton lacks the shoulder DoFs needed for reach synthesis")
        lo, hi = spec.lower, spec.upper
        finite = np.isfinite(lo) & np.isfinite(hi)
        span = np.where(finite, hi - lo, 0.0)
        self.lo = np.where(finite, lo + LIMIT_MARGIN * span, -np.inf)
        self.hi = np.where(finite, hi - LIMIT_MARGIN * span, np.inf)
        self.scales = np.ones(spec.n_scale_groups)
        self.offsets = np.zeros((spec.n_keypoints, 3))

    def wrist_local(self, theta: np.ndarray) -> np.ndarray:
        x = self.model(theta, self.scales, self.offsets)
        st, t1, t8 = (x[k] for k in self.k_torso)
        frame = build_frame(FrameLandmarks(st, t1, t8))
        return frame.to_local(0.5 * (x[self.k_rad] + x[self.k_uln]))

    def solve(self, base: np.ndarray, direction: np.ndarray, reach: float = 1.2, reg: float = 0.02):
        """Arm angles pointing the torso-local wrist along ``direction``.

        The wrist direction is matched from the torso origin; a weak term
        pulls its distance toward ``reach`` so the arm extends as far as the
        limits allow.
        """
        d = np.asarray(direction, dtype=float)
        free = self.free
        neutral = 0.5 * (self.lo[free] + self.hi[free])

        def fun(q):
            theta = base.copy()
            theta[free] = q
            w = self.wrist_local(theta)
            n = np.linalg.norm(w)
            return np.concatenate([w / n - d, [0.1 * (n - reach)], reg * (q - neutral)])

        best = None
        for start in _ik_starts(d, self.lo[free], self.hi[free], self.spec, free):
            sol = least_squares(fun, start, bounds=(self.lo[free], self.hi[free]), method="trf")
            if best is None or sol.cost < best.cost:
                best = sol
        theta = base.copy()
        theta[free] = best.x
        return theta, self.wrist_local(theta)


def _ik_starts(direction, lo, hi, spec, free):
    names = [spec.dof_names[i] for i in free]
    mid = 0.5 * (lo + hi)
    starts = [mid.copy()]
    # seed the shoulder toward the requested hemisphere
    for flex in (1.3 if direction[1] > 0 else -0.6, 2.4 if direction[2] > 0 else 0.5):
        s = mid.copy()
        if "shoulder_flexion" in names:
            s[names.index("shoulder_flexion")] = flex
        if "shoulder_adduction" in names:
            s[names.index("shoulder_adduction")] = 0.6 if direction[0] < 0 else -1.0
        starts.append(np.clip(s, lo, hi))
    return starts


def _arm_waypoints(spec, script, rng, landmarks):
    ik = _WristIK(spec, landmarks)
    lo, hi = ik.lo, ik.hi
    base = np.zeros(spec.n_dof)
    base[:3] = SUBJECT_ROOT
    times, thetas = [], []
    t = 0.0
    for d_index, directive in enumerate(script.directives):
        step = directive.duration / directive.density
        for k in range(directive.density):
            for _attempt in range(IK_ATTEMPTS):
                theta = base.copy()
                # non-IK joints wander inside their (shrunk) limits
                others = [i for i in range(6, spec.n_dof) if i not in ik.free]
                theta[others] = rng.uniform(lo[others] + 0.3 * (hi[others] - lo[others]), hi[others] - 0.3 * (hi[others] - lo[others]))
                if "elbow_flexion" in spec.dof_names:
                    e = spec.dof_index("elbow_flexion")
                    theta[e] = rng.uniform(max(lo[e], 0.05), max(lo[e], 0.05) + 0.35)
                direction = octant_direction(directive.octant, rng)
                theta, w = ik.solve(theta, direction)
                if Octant(int(octant_codes(w[None])[0])) == directive.octant:
                    break
            else:
                raise ScriptError(
                    f"directive {d_index} ({directive.octant.label}) is unreachable under the joint limits"
                )
            times.append(t + (k + 0.5) * step)
            thetas.append(theta)
        t += directive.duration
    return np.array(times), np.array(thetas)


def _arm_trial(spec, script, rng, landmarks):
    way_t, way_theta = _arm_waypoints(spec, script, rng, landmarks)
    n = int(round(script.duration * script.frame_rate))
    t = np.arange(n) / script.frame_rate
    if way_t.size == 1:
        poses = np.repeat(way_theta, n, axis=0)
    else:
        # clamp to the waypoint span so the ends hold still instead of extrapolating
        tq = np.clip(t, way_t[0], way_t[-1])
        poses = PchipInterpolator(way_t, way_theta, axis=0)(tq)
    poses[:, :6] = _root_motion(t, script.sway, rng)
    keypoints = forward(spec, poses)
    return t, poses, keypoints


# ---------------------------------------------------------------------------
# shell-mode generation


def _raster(octant: Octant, rows: int, samples_per_row: int, margin: float = 1e-3) -> np.ndarray:
    """Serpentine path of unit vectors covering one octant patch."""
    els = np.linspace(margin, math.pi / 2 - margin, rows)
    pts = []
    for r, el in enumerate(els):
        az = np.linspace(margin, math.pi / 2 - margin, samples_per_row)
        if r % 2:
            az = az[::-1]
        pts.append(np.column_stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.full(az.size, np.sin(el))]))
    signs = np.array([octant.ml_sign, octant.ap_sign, octant.v_sign])
    return np.concatenate(pts) * signs


def _slerp_path(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    omega = math.acos(float(np.clip(a @ b, -1.0, 1.0)))
    if omega < 1e-9:
        return np.repeat(a[None], n, axis=0)
    s = np.linspace(0.0, 1.0, n)[:, None]
    return (np.sin((1 - s) * omega) * a + np.sin(s * omega) * b) / math.sin(omega)


def shell_wrist_path(script: TrialScript) -> np.ndarray:
    """Torso-local wrist positions (T, 3) for a shell-mode script."""
    n_total = int(round(script.duration * script.frame_rate))
    chunks = []
    prev_end = None
    for directive in script.directives:
        n = max(int(round(directive.duration * script.frame_rate)), 2)
        rows = max(directive.density, 2)
        if prev_end is not None:
            n_move = max(n // 10, 2)
        else:
            n_move = 0
        raster = _raster(directive.octant, rows, 200)
        # resample the raster to the frames left after the transition
        s = np.linspace(0, raster.shape[0] - 1, n - n_move)
        idx = np.floor(s).astype(int)
        frac = (s - idx)[:, None]
        nxt = np.minimum(idx + 1, raster.shape[0] - 1)
        path = (1 - frac) * raster[idx] + frac * raster[nxt]
        path /= np.linalg.norm(path, axis=1, keepdims=True)
        if n_move:
            chunks.append(_slerp_path(prev_end, path[0], n_move + 2)[1:-1])
        chunks.append(path)
        prev_end = path[-1]
    dirs = np.concatenate(chunks)
    dirs = dirs[:n_total] if dirs.shape[0] >= n_total else np.vstack([dirs, np.repeat(dirs[-1:], n_total - dirs.shape[0], 0)])
    return script.shell_radius * dirs


def _shell_trial(spec, script, rng, landmarks):
    n = int(round(script.duration * script.frame_rate))
    t = np.arange(n) / script.frame_rate
    poses = np.zeros((n, spec.n_dof))
    poses[:, 6:] = np.clip(0.0, spec.lower[6:], spec.upper[6:])
    poses[:, :6] = _root_motion(t, script.sway, rng)
    keypoints = forward(spec, poses)
    names = spec.keypoint_names
    st, t1, t8 = (keypoints[:, names.index(n_)] for n_ in landmarks.torso)
    origins, bases = build_frames(st, t1, t8)
    local = shell_wrist_path(script)
    wrist = origins + np.einsum("tij,tj->ti", bases, local)
    half = 0.035 * bases[:, :, 0]
    keypoints[:, names.index(landmarks.wrist_radial)] = wrist + half
    keypoints[:, names.index(landmarks.wrist_ulnar)] = wrist - half
    # the rest of the arm follows the wrist so 2D views look plausible
    shoulder = keypoints[:, names.index("right_acromion")] if "right_acromion" in names else origins
    for name, frac in (("elbow_lateral", 0.5), ("elbow_medial", 0.5), ("hand_index", 1.12), ("hand_pinky", 1.1)):
        if name in names:
            keypoints[:, names.index(name)] = shoulder + frac * (wrist - shoulder)
    return t, None, keypoints


# ---------------------------------------------------------------------------
# public API


def generate_trial(
    skeleton: SkeletonSpec,
    script: TrialScript,
    cameras: Optional[Mapping[str, CameraModel]] = None,
    landmarks: LandmarkMap = KEYPOINT_MAP,
) -> SyntheticTrial:
    """Generate one deterministic synthetic trial.

    Raises
    ------
    ScriptError
        If a directive's octant cannot be reached within the joint limits.
    """
    cameras = cameras or {}
    rng = np.random.default_rng(script.seed)
    if script.mode == "arm":
        t, poses, kp = _arm_trial(skeleton, script, rng, landmarks)
    else:
        t, poses, kp = _shell_trial(skeleton, script, rng, landmarks)
    clean = KeypointTrajectory(t, skeleton.keypoint_names, kp, frame_rate=script.frame_rate)
    pixels = {name: project_trajectory(clean, cam) for name, cam in sorted(cameras.items())}

    noise_rng = np.random.default_rng([script.seed, 1])
    noise = script.noise
    if noise.is_zero:
        return SyntheticTrial(script, poses, clean, pixels, clean, dict(pixels), BodyParams.identity(skeleton))

    noisy = clean
    for cam_name, sigma in sorted(noise.sigma_depth.items()):
        if cam_name not in cameras:
            raise ValidationError(f"depth noise references unknown camera {cam_name!r}")
        noisy = inject_depth_noise(noisy, cameras[cam_name], sigma, noise_rng)
    if noise.sigma_3d > 0:
        noisy = noisy.replace(positions=noisy.positions + noise_rng.normal(0.0, noise.sigma_3d, noisy.positions.shape))
    noisy_pixels = {}
    for name, px in pixels.items():
        if noise.sigma_px > 0:
            px = px.replace(positions=px.positions + noise_rng.normal(0.0, noise.sigma_px, px.positions.shape))
        noisy_pixels[name] = px
    if noise.dropout > 0:
        drop = noise_rng.random(clean.present.shape) < noise.dropout
        noisy = _drop(noisy, drop)
        noisy_pixels = {k: _drop(v, drop) for k, v in noisy_pixels.items()}
    return SyntheticTrial(script, poses, clean, pixels, noisy, noisy_pixels, BodyParams.identity(skeleton))


def _drop(traj, mask):
    pos = traj.positions.copy()
    pos[mask] = np.nan
    conf = np.where(mask, 0.0, traj.confidences)
    return traj.replace(positions=pos, confidences=conf)


def project_trajectory(traj: KeypointTrajectory, cam: CameraModel) -> PixelTrajectory:
    """2D detections of a 3D trajectory; behind-camera samples become missing."""
    uv, valid = project_points(cam, traj.positions)
    conf = np.where(valid, traj.confidences, 0.0)
    return PixelTrajectory(traj.timestamps, traj.names, uv, conf, traj.frame_rate)


def inject_depth_noise(
    traj: KeypointTrajectory,
    cam: CameraModel,
    sigma: float,
    seed=None,
    names: Optional[Sequence[str]] = None,
) -> KeypointTrajectory:
    """Perturb samples along their camera rays by zero-mean Gaussian distances.

    Only keypoints in ``names`` (default: all) are perturbed. ``seed`` may be
    an int or a ``numpy.random.Generator``.
    """
    if sigma < 0:
        raise ValidationError("sigma must be non-negative")
    if sigma == 0:
        return traj
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pos = traj.positions
    eps = rng.normal(0.0, sigma, size=pos.shape[:2])
    if names is not None:
        keep = np.array([n in set(names) for n in traj.names])
        eps = eps * keep
    rays = cam.ray_directions(pos)
    return traj.replace(positions=pos + eps[..., None] * rays)


def brute_force_score(wrist_local, sphere: TargetSphere, capture_radius: float = 0.05) -> Dict[Octant, dict]:
    """Direct all-pairs scan: per analyzed octant available/reached/percent.

    Deliberately shares no code with the scoring module beyond the sphere.
    """
    w = np.asarray(wrist_local, dtype=float).reshape(-1, 3)
    w = w[~np.isnan(w).any(axis=1)]
    out = {}
    counts = {o: [0, 0] for o in ANALYZED_OCTANTS}
    for target in sphere.targets:
        signs = (target[0] >= 0, target[1] >= 0, target[2] >= 0)
        octant = Octant.from_signs(1 if signs[0] else -1, 1 if signs[1] else -1, 1 if signs[2] else -1)
        if octant not in counts:
            continue
        hit = False
        if w.shape[0]:
            d = np.sqrt(((w - target) ** 2).sum(axis=1))
            hit = bool((d <= capture_radius).any())
        counts[octant][0] += 1
        counts[octant][1] += int(hit)
    for o, (avail, reached) in counts.items():
        out[o] = {
            "available": avail,
            "reached": reached,
            "percent": None if avail == 0 else 100.0 * reached / avail,
        }
    return out


def flip_wrist(traj: KeypointTrajectory, frames, axes, landmarks: LandmarkMap = KEYPOINT_MAP) -> KeypointTrajectory:
    """Mirror the torso-local wrist across the given axis planes on chosen frames.

    ``axes`` is any subset of ``{"ML", "AP", "SI"}``. Used to build streams
    with a scripted octant-disagreement schedule.
    """
    idx = {"ML": 0, "AP": 1, "SI": 2, "V": 2}
    sign = np.ones(3)
    for a in axes:
        sign[idx[a]] = -1.0
    tf = TorsoFrameTransformer(landmarks).fit(traj)
    origins, bases = tf.frames(traj)
    local = tf.transform(traj)
    frames = np.asarray(frames, dtype=int)
    new_local = local[frames] * sign
    new_wrist = origins[frames] + np.einsum("tij,tj->ti", bases[frames], new_local)
    pos = traj.positions.copy()
    kr, ku = traj.index(landmarks.wrist_radial), traj.index(landmarks.wrist_ulnar)
    half = 0.5 * (pos[frames, kr] - pos[frames, ku])
    pos[frames, kr] = new_wrist + half
    pos[frames, ku] = new_wrist - half
    return traj.replace(positions=pos)


def default_script(kind: str = "uerw", seed: int = 0, mode: str = "arm", **kw) -> TrialScript:
    """Built-in scripts: ``uerw`` (all six analyzed octants), ``anterior``, ``posterior``."""
    if kind == "uerw":
        octs = [Octant.SUP_ANT_IPSIL, Octant.SUP_ANT_CONTRA, Octant.INF_ANT_CONTRA,
                Octant.INF_ANT_IPSIL, Octant.INF_POST_IPSIL, Octant.SUP_POST_IPSIL]
    elif kind == "anterior":
        octs = [Octant.SUP_ANT_IPSIL, Octant.SUP_ANT_CONTRA, Octant.INF_ANT_CONTRA, Octant.INF_ANT_IPSIL]
    elif kind == "posterior":
        octs = [Octant.SUP_POST_IPSIL, Octant.INF_POST_IPSIL]
    else:
        raise ValidationError(f"unknown script kind {kind!r}")
    density = kw.pop("density", 3 if mode == "arm" else 14)
    duration = kw.pop("duration", 2.0 if mode == "arm" else 12.0)
    return TrialScript([ReachDirective(o, density, duration) for o in octs], seed=seed, mode=mode, **kw)
