"""Implicit joint-angle trajectory fitting to 3D and 2D keypoints.

Each trial gets its own network ``f_phi: t -> theta(t)``: a sinusoidal time
encoding fed to an MLP whose rotational outputs pass through ``tanh`` and are
rescaled into the joint limits. All trial networks and the shared body
parameters ``beta`` are optimized jointly with Adam on

    L = lambda_3d * L_3d + lambda_2d * L_2d

where both terms are confidence-weighted Huber losses of keypoint residuals
(10 cm quadratic zone in 3D, 5 px in 2D).
"""

from __future__ import annotations

import logging
import math
from decimal import Decimal
from fractions import Fraction
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import torch
from torch import nn
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .camera import CameraModel
from .exceptions import NumericalError, ValidationError
from .kinematics import BodyParams, SkeletonSpec, kinematic_model, load_skeleton
from .trajectory_io import KeypointTrajectory, PixelTrajectory

logger = logging.getLogger(__name__)

DTYPE = torch.float64


@dataclass(frozen=True)
class FitConfig:
    lambda_3d: float = 1.0
    lambda_2d: float = 0.1
    delta_3d: float = 0.10
    delta_2d: float = 5.0
    n_samples: int = 300
    n_iter: int = 2000
    lr_start: float = 1e-3
    lr_end: float = 1e-6
    weight_decay: float = 1e-5
    hidden_layers: int = 4
    width: int = 256
    n_bands: int = 8
    seed: int = 0

    def __post_init__(self):
        for f in ("lambda_3d", "delta_3d", "delta_2d", "lr_start", "lr_end"):
            if not getattr(self, f) > 0:
                raise ValidationError(f"{f} must be positive")
        for f in ("lambda_2d", "weight_decay"):
            if getattr(self, f) < 0:
                raise ValidationError(f"{f} must be non-negative")
        if self.n_iter < 0 or self.n_samples < 1 or self.hidden_layers < 1 or self.width < 1 or self.n_bands < 1:
            raise ValidationError("n_iter >= 0 and n_samples, hidden_layers, width, n_bands >= 1 required")

    @classmethod
    def from_dict(cls, data: Mapping) -> "FitConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown fit config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Trial:
    """Observations of one trial.

    ``observations`` holds 3D keypoints; ``pixels`` maps camera names to 2D
    detections. All streams must share timestamps. Keypoint names are matched
    to skeleton keypoints by name; unmatched skeleton keypoints are ignored.
    """

    observations: Optional[KeypointTrajectory] = None
    pixels: Dict[str, PixelTrajectory] = field(default_factory=dict)

    @property
    def timestamps(self) -> np.ndarray:
        if self.observations is not None:
            return self.observations.timestamps
        return next(iter(self.pixels.values())).timestamps


# ---------------------------------------------------------------------------
# elementary pieces


def encode_time(t, span, n_bands: int):
    """Sinusoidal encoding ``[sin(2^k pi s), cos(2^k pi s)]_{k<L}`` of normalized time.

    ``s = (t - t0) / (t1 - t0)`` is clamped to [0, 1] (with a warning).
    Works on numpy arrays and torch tensors; output has a trailing axis of
    size ``2 * n_bands`` with sine and cosine interleaved per band.
    """
    t0, t1 = span
    if isinstance(t, torch.Tensor):
        s = (t - t0) / (t1 - t0)
        if bool(((s < 0) | (s > 1)).any()):
            logger.warning("time outside trial span; clamping")
            s = s.clamp(0.0, 1.0)
        freqs = math.pi * 2.0 ** torch.arange(n_bands, dtype=s.dtype)
        ang = s[..., None] * freqs
        return torch.stack([torch.sin(ang), torch.cos(ang)], dim=-1).flatten(-2)
    s = (np.asarray(t, dtype=float) - t0) / (t1 - t0)
    if np.any((s < 0) | (s > 1)):
        logger.warning("time outside trial span; clamping")
        s = np.clip(s, 0.0, 1.0)
    ang = s[..., None] * (math.pi * 2.0 ** np.arange(n_bands))
    return np.stack([np.sin(ang), np.cos(ang)], axis=-1).reshape(*np.shape(s), 2 * n_bands)


def huber(r, delta):
    """``0.5 r^2`` for ``r <= delta``, else ``delta (r - 0.5 delta)``."""
    if isinstance(r, torch.Tensor):
        return torch.where(r <= delta, 0.5 * r * r, delta * (r - 0.5 * delta))
    if isinstance(r, (Fraction, Decimal)):
        # exact arithmetic for exact inputs
        half = type(r)(1) / 2
        return half * r * r if r <= delta else delta * (r - half * delta)
    r = np.asarray(r, dtype=float)
    out = np.where(r <= delta, 0.5 * r * r, delta * (r - 0.5 * delta))
    return float(out) if out.ndim == 0 else out


def _huber_of_sq(sq: torch.Tensor, delta: float) -> torch.Tensor:
    # Huber of a norm given its square; avoids the sqrt at zero residual
    r = torch.sqrt(torch.clamp(sq, min=delta * delta))
    return torch.where(sq <= delta * delta, 0.5 * sq, delta * (r - 0.5 * delta))


def _as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(np.asarray(x, dtype=float), dtype=DTYPE)


def _residual_loss(pred, obs, conf, delta):
    pred, obs, conf = _as_tensor(pred), _as_tensor(obs), _as_tensor(conf)
    if pred.shape != obs.shape or conf.shape != pred.shape[:-1]:
        raise ValidationError(
            f"shape mismatch: prediction {tuple(pred.shape)}, observation {tuple(obs.shape)}, "
            f"confidence {tuple(conf.shape)}"
        )
    missing = torch.isnan(obs).any(dim=-1)
    obs = torch.where(missing[..., None], torch.zeros_like(obs), obs)
    conf = torch.where(missing, torch.zeros_like(conf), conf)
    sq = ((pred - obs) ** 2).sum(dim=-1)
    return (conf * _huber_of_sq(sq, delta)).mean(dim=-1)


def loss_3d(x_hat, x_obs, conf, delta: float = 0.10):
    """Mean over keypoints of ``c_j * huber(||x_hat_j - x_j||)``.

    Inputs are (..., J, 3) and (..., J); NaN observations count as
    confidence 0. Returns a tensor of shape (...).
    """
    return _residual_loss(x_hat, x_obs, conf, delta)


def project_torch(cam: CameraModel, x: torch.Tensor):
    """Differentiable pinhole projection; returns pixels and a depth>0 mask."""
    R = torch.tensor(np.array(cam.rotation), dtype=x.dtype)
    t = torch.tensor(np.array(cam.translation), dtype=x.dtype)
    P = x @ R.T + t
    Z = P[..., 2]
    valid = Z > 0
    Zs = torch.where(valid, Z, torch.ones_like(Z))
    u = torch.stack([cam.fx * P[..., 0] / Zs + cam.cx, cam.fy * P[..., 1] / Zs + cam.cy], dim=-1)
    return u, valid


def loss_2d(x_hat, cam: CameraModel, u_obs, conf, delta: float = 5.0):
    """Mean over keypoints of ``c_j * huber(||Pi(x_hat_j) - u_j||)`` in pixels.

    Model points behind the camera contribute nothing.
    """
    x_hat = _as_tensor(x_hat)
    u_hat, valid = project_torch(cam, x_hat)
    conf = _as_tensor(conf)
    if conf.shape != valid.shape:
        raise ValidationError(f"confidence shape {tuple(conf.shape)} != {tuple(valid.shape)}")
    conf = torch.where(valid, conf, torch.zeros_like(conf))
    return _residual_loss(u_hat, u_obs, conf, delta)


def composite_loss(l3d, l2d, lambda_3d: float = 1.0, lambda_2d: float = 0.1):
    return lambda_3d * l3d + lambda_2d * l2d


# ---------------------------------------------------------------------------
# trajectory network


class TrajectoryNet(nn.Module):
    """Time -> raw joint outputs, one per skeleton DoF."""

    def __init__(self, n_dof: int, span, hidden_layers: int = 4, width: int = 256, n_bands: int = 8):
        super().__init__()
        self.span = (float(span[0]), float(span[1]))
        self.n_bands = n_bands
        layers: List[nn.Module] = []
        d = 2 * n_bands
        for _ in range(hidden_layers):
            layers += [nn.Linear(d, width), nn.GELU()]
            d = width
        layers.append(nn.Linear(d, n_dof))
        self.mlp = nn.Sequential(*layers)

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        return self.mlp(encode_time(t, self.span, self.n_bands))


def rescale_outputs(raw, lower, upper, anchor=None):
    """Map raw outputs to poses.

    Limited DoFs become ``lo + (tanh(r) + 1) / 2 * (hi - lo)``; unlimited
    (root) DoFs pass through, shifted by ``anchor`` when given.
    """
    raw = _as_tensor(raw)
    lo = torch.as_tensor(np.nan_to_num(lower, neginf=0.0), dtype=raw.dtype)
    hi = torch.as_tensor(np.nan_to_num(upper, posinf=0.0), dtype=raw.dtype)
    limited = torch.as_tensor(np.isfinite(lower) & np.isfinite(upper))
    bounded = lo + 0.5 * (torch.tanh(raw) + 1.0) * (hi - lo)
    free = raw if anchor is None else raw + torch.as_tensor(anchor, dtype=raw.dtype)
    return torch.where(limited, bounded, free)


# ---------------------------------------------------------------------------
# problem assembly


@dataclass
class _TrialData:
    t: torch.Tensor
    span: tuple
    x3d: Optional[torch.Tensor]
    c3d: Optional[torch.Tensor]
    kp3d: Optional[torch.Tensor]
    views: list  # (camera, u, c, keypoint index)


def _match(spec: SkeletonSpec, traj: KeypointTrajectory):
    names = [n for n in traj.names if n in spec.keypoint_names]
    if not names:
        raise ValidationError("observation stream shares no keypoint names with the skeleton")
    sub = traj.select(names)
    idx = torch.tensor([spec.keypoint_names.index(n) for n in names], dtype=torch.long)
    return sub, idx


def _prepare(trials: Sequence[Trial], spec: SkeletonSpec, cameras: Mapping[str, CameraModel]):
    if not trials:
        raise ValidationError("fit needs at least one trial")
    out = []
    for i, trial in enumerate(trials):
        if trial.observations is None and not trial.pixels:
            raise ValidationError(f"trial {i} has no observations")
        t = trial.timestamps
        if t.shape[0] < 2:
            raise ValidationError(f"trial {i} needs at least 2 frames")
        x3d = c3d = kp3d = None
        if trial.observations is not None:
            sub, kp3d = _match(spec, trial.observations)
            x3d = torch.tensor(sub.positions, dtype=DTYPE)
            c3d = torch.tensor(sub.confidences, dtype=DTYPE)
        views = []
        for cam_name, px in sorted(trial.pixels.items()):
            if cam_name not in cameras:
                raise ValidationError(f"trial {i} references unknown camera {cam_name!r}")
            if not np.array_equal(px.timestamps, t):
                raise ValidationError(f"trial {i}: 2D stream {cam_name!r} timestamps differ from 3D stream")
            sub, kp = _match(spec, px)
            views.append(
                (cameras[cam_name], torch.tensor(sub.positions, dtype=DTYPE), torch.tensor(sub.confidences, dtype=DTYPE), kp)
            )
        out.append(_TrialData(torch.tensor(t, dtype=DTYPE), (float(t[0]), float(t[-1])), x3d, c3d, kp3d, views))
    return out


def _root_anchor(spec: SkeletonSpec, data: _TrialData) -> np.ndarray:
    # root translation offset so the rest pose starts on top of the observed torso
    if data.x3d is None:
        return np.zeros(3)
    root = spec.segments[0].name
    rest = {k.name: np.array(k.position) for k in spec.keypoints if k.segment == root}
    idx = [int(j) for j in data.kp3d]
    names = [spec.keypoint_names[j] for j in idx]
    obs = data.x3d.numpy()
    cols = [c for c, n in enumerate(names) if n in rest]
    if not cols:
        cols = list(range(len(names)))
        rest_mean = np.zeros(3)
    else:
        rest_mean = np.mean([rest[names[c]] for c in cols], axis=0)
    pts = obs[:, cols].reshape(-1, 3)
    pts = pts[~np.isnan(pts).any(axis=1)]
    if pts.shape[0] == 0:
        return np.zeros(3)
    return pts.mean(axis=0) - rest_mean


def stratified_indices(timestamps: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """One uniform time per 1/n stratum of the span, snapped to the nearest frame."""
    t = np.asarray(timestamps, dtype=float)
    u = (np.arange(n) + rng.random(n)) / n
    target = t[0] + u * (t[-1] - t[0])
    pos = np.clip(np.searchsorted(t, target), 1, t.size - 1)
    left = t[pos - 1]
    right = t[pos]
    return np.where(target - left <= right - target, pos - 1, pos)


class _Problem(nn.Module):
    """All trainable parameters plus the loss evaluation."""

    def __init__(self, spec, trials_data, config: FitConfig, anchors):
        super().__init__()
        self.spec = spec
        self.config = config
        self.data = trials_data
        self.fk = kinematic_model(spec)
        self.nets = nn.ModuleList(
            [TrajectoryNet(spec.n_dof, d.span, config.hidden_layers, config.width, config.n_bands) for d in trials_data]
        ).to(DTYPE)
        self.scales = nn.Parameter(torch.ones(spec.n_scale_groups, dtype=DTYPE))
        self.offsets = nn.Parameter(torch.zeros(spec.n_keypoints, 3, dtype=DTYPE))
        anchor = np.zeros((len(trials_data), spec.n_dof))
        anchor[:, :3] = anchors
        self.register_buffer("anchors", torch.as_tensor(anchor, dtype=DTYPE))
        self.lower = spec.lower
        self.upper = spec.upper

    def pose(self, i: int, t: torch.Tensor) -> torch.Tensor:
        raw = self.nets[i](t)
        return rescale_outputs(raw, self.lower, self.upper, self.anchors[i])

    def keypoints(self, theta: torch.Tensor) -> torch.Tensor:
        return self.fk(theta, self.scales, self.offsets)

    def trial_terms(self, i: int, idx: torch.Tensor):
        """Per-sample (L_3d, L_2d) for trial ``i`` at frame indices ``idx``."""
        d = self.data[i]
        theta = self.pose(i, d.t[idx])
        x = self.keypoints(theta)
        l3 = torch.zeros(idx.shape[0], dtype=DTYPE)
        l2 = torch.zeros(idx.shape[0], dtype=DTYPE)
        if d.x3d is not None:
            l3 = loss_3d(x[:, d.kp3d], d.x3d[idx], d.c3d[idx], self.config.delta_3d)
        for cam, u, c, kp in d.views:
            l2 = l2 + loss_2d(x[:, kp], cam, u[idx], c[idx], self.config.delta_2d)
        return l3, l2

    def total(self, samples: Sequence[torch.Tensor], check: Optional[int] = None) -> torch.Tensor:
        cfg = self.config
        total = torch.zeros((), dtype=DTYPE)
        for i, idx in enumerate(samples):
            l3, l2 = self.trial_terms(i, idx)
            if check is not None:
                for term, val in (("L_3d", l3), ("L_2d", l2)):
                    if not torch.isfinite(val).all():
                        raise NumericalError(
                            f"non-finite {term} in trial {i} at iteration {check}", iteration=check, term=term
                        )
            total = total + composite_loss(l3, l2, cfg.lambda_3d, cfg.lambda_2d).sum()
        return total

    def draw_samples(self, rng: np.random.Generator) -> List[torch.Tensor]:
        return [
            torch.as_tensor(stratified_indices(d.t.numpy(), self.config.n_samples, rng), dtype=torch.long)
            for d in self.data
        ]

    def project_body(self):
        lo, hi = self.spec.scale_range
        with torch.no_grad():
            self.scales.clamp_(lo, hi)


def cosine_lr(step: int, n_steps: int, lr_start: float, lr_end: float) -> float:
    """Cosine decay hitting ``lr_start`` at step 0 and ``lr_end`` at the last step."""
    if n_steps <= 1:
        return lr_start
    frac = step / (n_steps - 1)
    return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + math.cos(math.pi * frac))


@dataclass
class FitResult:
    """Outcome of :func:`fit`.

    ``poses[i]`` and ``keypoints[i]`` are evaluated at every timestamp of
    trial ``i``; ``state`` holds the network weights (phi) of all trials.
    """

    skeleton: SkeletonSpec
    config: FitConfig
    body: BodyParams
    loss_trace: np.ndarray
    timestamps: List[np.ndarray]
    poses: List[np.ndarray]
    keypoints: List[np.ndarray]
    state: Dict[str, torch.Tensor]
    anchors: np.ndarray

    def trajectory(self, i: int = 0, frame_rate: Optional[float] = None) -> KeypointTrajectory:
        """Reconstructed keypoints of trial ``i`` as a scoreable trajectory."""
        from .trajectory_io import infer_frame_rate

        t = self.timestamps[i]
        return KeypointTrajectory(
            t,
            self.skeleton.keypoint_names,
            self.keypoints[i],
            frame_rate=infer_frame_rate(t) if frame_rate is None else frame_rate,
        )

    def smoothed_trace(self, window: int = 100) -> np.ndarray:
        """Trailing-window mean of the loss trace."""
        trace = np.asarray(self.loss_trace, dtype=float)
        if trace.size == 0:
            return trace
        c = np.cumsum(np.concatenate([[0.0], trace]))
        idx = np.arange(1, trace.size + 1)
        lo = np.maximum(0, idx - window)
        return (c[idx] - c[lo]) / (idx - lo)


def build_problem(trials, skeleton: SkeletonSpec, cameras=None, config: Optional[FitConfig] = None):
    """Assemble the parameter set and data for :func:`fit` without optimizing.

    Useful for evaluating :func:`total_loss` and its gradient directly.
    """
    config = config or FitConfig()
    cameras = cameras or {}
    data = _prepare(trials, skeleton, cameras)
    anchors = np.stack([_root_anchor(skeleton, d) for d in data])
    torch.manual_seed(config.seed)
    return _Problem(skeleton, data, config, anchors)


def total_loss(problem: _Problem, samples=None, seed: Optional[int] = None) -> torch.Tensor:
    """``sum over trials and samples of lambda_3d L_3d + lambda_2d L_2d``.

    ``samples`` are per-trial frame index tensors; when omitted they are drawn
    by stratified sampling with ``seed`` (default: the config seed).
    """
    if samples is None:
        rng = np.random.default_rng(problem.config.seed if seed is None else seed)
        samples = problem.draw_samples(rng)
    return problem.total(samples)


def fit(
    trials: Sequence[Trial],
    skeleton: Optional[SkeletonSpec] = None,
    cameras: Optional[Mapping[str, CameraModel]] = None,
    config: Optional[FitConfig] = None,
    problem: Optional[_Problem] = None,
    callback=None,
) -> FitResult:
    """Jointly optimize every trial network and the shared body parameters.

    Each step draws ``n_samples`` stratified frames per trial, evaluates the
    composite loss and takes one AdamW step (decoupled weight decay on network
    weights only) under a cosine learning-rate decay.

    Raises
    ------
    ValidationError
        Empty trial set or malformed observations.
    NumericalError
        A loss term became non-finite; carries the iteration and term.
    """
    skeleton = skeleton or load_skeleton()
    config = config or FitConfig()
    if problem is None:
        problem = build_problem(trials, skeleton, cameras, config)
    rng = np.random.default_rng(config.seed)
    net_params = [p for net in problem.nets for p in net.parameters()]
    opt = torch.optim.AdamW(
        [
            {"params": net_params, "weight_decay": config.weight_decay},
            {"params": [problem.scales, problem.offsets], "weight_decay": 0.0},
        ],
        lr=config.lr_start,
    )
    trace = []
    for it in range(config.n_iter):
        lr = cosine_lr(it, config.n_iter, config.lr_start, config.lr_end)
        for g in opt.param_groups:
            g["lr"] = lr
        samples = problem.draw_samples(rng)
        loss = problem.total(samples, check=it)
        value = float(loss.detach())
        if not math.isfinite(value):
            raise NumericalError(f"non-finite loss at iteration {it}", iteration=it, term="total")
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()
        problem.project_body()
        trace.append(value)
        if callback is not None:
            callback(it, value)
        if it % 200 == 0:
            logger.info("iteration %d loss %.6g lr %.3g", it, value, lr)
    return _collect(problem, np.array(trace))


def _collect(problem: _Problem, trace: np.ndarray) -> FitResult:
    spec = problem.spec
    times, poses, kps = [], [], []
    with torch.no_grad():
        for i, d in enumerate(problem.data):
            theta = problem.pose(i, d.t)
            x = problem.keypoints(theta)
            times.append(d.t.numpy().copy())
            poses.append(theta.numpy().copy())
            kps.append(x.numpy().copy())
        body = BodyParams(problem.scales.detach().numpy().copy(), problem.offsets.detach().numpy().copy())
    state = {k: v.detach().clone() for k, v in problem.state_dict().items()}
    return FitResult(spec, problem.config, body, trace, times, poses, kps, state, problem.anchors.numpy()[:, :3].copy())


class ImplicitTrajectoryFitter(BaseEstimator):
    """Estimator wrapper around :func:`fit`.

    ``fit(X)`` takes a list of :class:`Trial`; ``transform(X)`` returns the
    reconstructed keypoint trajectories of those trials (refitting is not
    implied: call ``fit`` first); ``predict(times, trial=0)`` evaluates the
    fitted keypoints at arbitrary times.

    Parameters mirror :class:`FitConfig`; ``skeleton`` defaults to the shipped
    torso + right-arm model and ``cameras`` maps names used in
    ``Trial.pixels`` to :class:`CameraModel` objects.
    """

    def __init__(
        self,
        skeleton=None,
        cameras=None,
        lambda_3d=1.0,
        lambda_2d=0.1,
        delta_3d=0.10,
        delta_2d=5.0,
        n_samples=300,
        n_iter=2000,
        lr_start=1e-3,
        lr_end=1e-6,
        weight_decay=1e-5,
        hidden_layers=4,
        width=256,
        n_bands=8,
        random_state=0,
    ):
        self.skeleton = skeleton
        self.cameras = cameras
        self.lambda_3d = lambda_3d
        self.lambda_2d = lambda_2d
        self.delta_3d = delta_3d
        self.delta_2d = delta_2d
        self.n_samples = n_samples
        self.n_iter = n_iter
        self.lr_start = lr_start
        self.lr_end = lr_end
        self.weight_decay = weight_decay
        self.hidden_layers = hidden_layers
        self.width = width
        self.n_bands = n_bands
        self.random_state = random_state

    def _config(self) -> FitConfig:
        params = self.get_params(deep=False)
        params.pop("skeleton")
        params.pop("cameras")
        params["seed"] = params.pop("random_state")
        return FitConfig(**params)

    def fit(self, X: Sequence[Trial], y=None):
        spec = self.skeleton if isinstance(self.skeleton, SkeletonSpec) else load_skeleton(self.skeleton)
        self.problem_ = build_problem(X, spec, self.cameras, self._config())
        self.result_ = fit(X, spec, self.cameras, self._config(), problem=self.problem_)
        self.skeleton_ = spec
        self.body_ = self.result_.body
        self.loss_trace_ = self.result_.loss_trace
        return self

    def transform(self, X=None) -> List[KeypointTrajectory]:
        check_is_fitted(self, "result_")
        n = len(self.result_.timestamps)
        return [self.result_.trajectory(i) for i in range(n)]

    def predict(self, times, trial: int = 0) -> np.ndarray:
        """Keypoints (N, K, 3) of trial ``trial`` at the given times."""
        check_is_fitted(self, "result_")
        t = torch.as_tensor(np.asarray(times, dtype=float), dtype=DTYPE)
        with torch.no_grad():
            return self.problem_.keypoints(self.problem_.pose(trial, t)).numpy()

    def predict_pose(self, times, trial: int = 0) -> np.ndarray:
        check_is_fitted(self, "result_")
        t = torch.as_tensor(np.asarray(times, dtype=float), dtype=DTYPE)
        with torch.no_grad():
            return self.problem_.pose(trial, t).numpy()
