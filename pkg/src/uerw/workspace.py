"""Reachable-workspace scoring: target sphere, octants and capture simulation.

Targets live in torso-local (ML, AP, V) coordinates on a sphere whose radius
is the subject's peak reach. A target counts as reached when the wrist comes
within the capture radius (5 cm) of it in any frame.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ValidationError

DEFAULT_N_TARGETS = 800
CAPTURE_RADIUS = 0.05
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


class Octant(enum.IntEnum):
    """Torso-local octants; the code is ``(ML<0) + 2*(AP<0) + 4*(V<0)``."""

    SUP_ANT_IPSIL = 0
    SUP_ANT_CONTRA = 1
    SUP_POST_IPSIL = 2
    SUP_POST_CONTRA = 3
    INF_ANT_IPSIL = 4
    INF_ANT_CONTRA = 5
    INF_POST_IPSIL = 6
    INF_POST_CONTRA = 7

    @property
    def ml_sign(self) -> int:
        return -1 if self.value & 1 else 1

    @property
    def ap_sign(self) -> int:
        return -1 if self.value & 2 else 1

    @property
    def v_sign(self) -> int:
        return -1 if self.value & 4 else 1

    @property
    def label(self) -> str:
        v = "Sup." if self.v_sign > 0 else "Inf."
        ap = "Ant." if self.ap_sign > 0 else "Post."
        ml = "Ipsil." if self.ml_sign > 0 else "Contra."
        return f"{v} {ap} {ml}"

    @property
    def analyzed(self) -> bool:
        return not (self.ap_sign < 0 and self.ml_sign < 0)

    @classmethod
    def from_signs(cls, ml_sign, ap_sign, v_sign) -> "Octant":
        return cls(int(ml_sign < 0) + 2 * int(ap_sign < 0) + 4 * int(v_sign < 0))

    @classmethod
    def from_label(cls, label: str) -> "Octant":
        for o in cls:
            if o.label == label:
                return o
        raise ValueError(f"unknown octant label {label!r}")


ANALYZED_OCTANTS = tuple(o for o in Octant if o.analyzed)


def classify_octant(p_local) -> Octant:
    """Octant of a single local point. Zero components count as positive."""
    p = np.asarray(p_local, dtype=float)
    return Octant(int(p[0] < 0) + 2 * int(p[1] < 0) + 4 * int(p[2] < 0))


def octant_codes(points) -> np.ndarray:
    """Vectorized octant codes for (N, 3) points; -1 where a row is missing."""
    p = np.asarray(points, dtype=float)
    codes = (p[..., 0] < 0) * 1 + (p[..., 1] < 0) * 2 + (p[..., 2] < 0) * 4
    codes = codes.astype(np.int64)
    codes[np.isnan(p).any(axis=-1)] = -1
    return codes


@dataclass(frozen=True, eq=False)
class TargetSphere:
    radius: float
    targets: np.ndarray
    octants: np.ndarray

    @property
    def n_targets(self) -> int:
        return self.targets.shape[0]


def fibonacci_sphere(n: int, offset: float = 0.0) -> np.ndarray:
    """``n`` near-uniform unit vectors; ``offset`` rotates the lattice about V."""
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(1.0 - z * z)
    phi = i * GOLDEN_ANGLE + offset
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def generate_targets(radius: float, n: int = DEFAULT_N_TARGETS, seed: int = 0) -> TargetSphere:
    """Place ``n`` targets on a Fibonacci lattice of the given radius.

    The azimuthal offset of the lattice is drawn from ``seed``, so the layout
    is fully determined by ``(n, seed)`` and scales exactly with ``radius``.
    """
    if not (radius > 0 and math.isfinite(radius)):
        raise ValidationError(f"radius must be positive, got {radius}")
    if n < 8:
        raise ValidationError(f"need at least 8 targets, got {n}")
    offset = np.random.default_rng(seed).uniform(0.0, 2.0 * math.pi)
    unit = fibonacci_sphere(int(n), offset)
    # renormalize so every target sits on the sphere to rounding
    unit /= np.linalg.norm(unit, axis=1, keepdims=True)
    targets = unit * float(radius)
    return TargetSphere(float(radius), targets, octant_codes(targets))


def peak_reach(wrist_local) -> float:
    """Maximum torso-local wrist distance over present frames."""
    w = np.asarray(wrist_local, dtype=float).reshape(-1, 3)
    present = ~np.isnan(w).any(axis=1)
    if not present.any():
        raise ValidationError("wrist trajectory has no present frames")
    return float(np.linalg.norm(w[present], axis=1).max())


def simulate_capture(wrist_local, sphere: TargetSphere, capture_radius: float = CAPTURE_RADIUS):
    """Boolean flag per target: did any present wrist frame come within range."""
    if not capture_radius > 0:
        raise ValidationError("capture_radius must be positive")
    w = np.asarray(wrist_local, dtype=float).reshape(-1, 3)
    w = w[~np.isnan(w).any(axis=1)]
    if w.shape[0] == 0:
        return np.zeros(sphere.n_targets, dtype=bool)
    dist, _ = cKDTree(w).query(sphere.targets, k=1)
    return dist <= capture_radius


@dataclass(frozen=True)
class OctantScore:
    octant: Octant
    available: int
    reached: int

    @property
    def percent(self) -> Optional[float]:
        if self.available == 0:
            return None
        return 100.0 * self.reached / self.available


@dataclass(frozen=True)
class WorkspaceReport:
    scores: Dict[Octant, OctantScore]
    peak_reach: float = math.nan

    def percent(self, octant) -> Optional[float]:
        return self.scores[Octant(octant)].percent

    def percents(self) -> Dict[Octant, Optional[float]]:
        return {o: s.percent for o, s in self.scores.items()}

    def rows(self, system: str = "") -> List[dict]:
        out = []
        for o, s in self.scores.items():
            pct = s.percent
            out.append(
                {
                    "octant": o.label,
                    "system": system,
                    "available": s.available,
                    "reached": s.reached,
                    "percent": "n/a" if pct is None else f"{pct:.6f}",
                }
            )
        return out


def percent_reached(flags, sphere: TargetSphere, peak: Optional[float] = None) -> WorkspaceReport:
    """Per analyzed octant: targets available, reached, and percent reached."""
    flags = np.asarray(flags, dtype=bool)
    if flags.shape != (sphere.n_targets,):
        raise ValidationError(
            f"{flags.shape[0] if flags.ndim else 0} flags for {sphere.n_targets} targets"
        )
    scores = {}
    for o in ANALYZED_OCTANTS:
        mask = sphere.octants == o.value
        scores[o] = OctantScore(o, int(mask.sum()), int(flags[mask].sum()))
    return WorkspaceReport(scores, sphere.radius if peak is None else float(peak))


class WorkspaceScorer(BaseEstimator):
    """Score one trial's torso-local wrist trajectory.

    Parameters
    ----------
    n_targets : int, default=800
    capture_radius : float, default=0.05
        Meters.
    radius : float, optional
        Fixed sphere radius (e.g. from a static trial). When None the peak
        reach of the trajectory passed to :meth:`fit` is used.
    seed : int, default=0
        Lattice azimuth seed.

    Attributes
    ----------
    peak_reach_ : float
    sphere_ : TargetSphere
    reached_ : ndarray of bool
    report_ : WorkspaceReport
    """

    def __init__(self, n_targets=DEFAULT_N_TARGETS, capture_radius=CAPTURE_RADIUS, radius=None, seed=0):
        self.n_targets = n_targets
        self.capture_radius = capture_radius
        self.radius = radius
        self.seed = seed

    def fit(self, X, y=None):
        X = _check_wrist(X)
        self.peak_reach_ = peak_reach(X)
        r = self.peak_reach_ if self.radius is None else float(self.radius)
        self.sphere_ = generate_targets(r, self.n_targets, self.seed)
        self.reached_ = simulate_capture(X, self.sphere_, self.capture_radius)
        self.report_ = percent_reached(self.reached_, self.sphere_, self.peak_reach_)
        return self

    def predict(self, X) -> np.ndarray:
        """Reached flags of another trajectory against the fitted sphere."""
        check_is_fitted(self, "sphere_")
        return simulate_capture(_check_wrist(X), self.sphere_, self.capture_radius)

    def fit_report(self, X) -> WorkspaceReport:
        return self.fit(X).report_


def _check_wrist(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != 3:
        raise ValidationError(f"wrist trajectory must have shape (T, 3), got {X.shape}")
    if np.isinf(X).any():
        raise ValidationError("wrist trajectory contains infinite values")
    return X
