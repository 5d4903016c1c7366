"""Keypoint and marker trajectory containers plus CSV/JSONL readers and writers.

Missing samples are explicit: an empty CSV cell (or ``null`` in JSONL) loads
as NaN positions with zero confidence. Nothing is interpolated.

CSV layout (3D)::

    # frame_rate=60
    time,wrist_x,wrist_y,wrist_z,wrist_c,...

The ``# frame_rate=`` comment is optional; without it the rate is inferred
from the timestamps. Pixel trajectories use ``_u,_v,_c`` suffixes. Row numbers
in error messages count data rows from 1.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
from dataclasses import dataclass
from typing import ClassVar, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import MissingLandmarkError, TrajectoryFormatError

DEFAULT_FRAME_RATE = 60.0


@dataclass(frozen=True, eq=False)
class KeypointTrajectory:
    """Time-stamped 3D keypoint positions with per-sample confidences.

    Parameters
    ----------
    timestamps : array of shape (T,)
        Seconds, strictly increasing.
    names : sequence of str
        Keypoint identifiers, unique.
    positions : array of shape (T, K, 3)
        Meters. NaN rows mark missing samples.
    confidences : array of shape (T, K), optional
        Values in [0, 1]; defaults to 1 for present samples. Missing samples
        always carry confidence 0.
    frame_rate : float
        Nominal sampling rate in Hz. Downstream math uses ``timestamps``.
    """

    ndim: ClassVar[int] = 3
    axes: ClassVar[Tuple[str, ...]] = ("x", "y", "z")

    timestamps: np.ndarray
    names: Tuple[str, ...]
    positions: np.ndarray
    confidences: Optional[np.ndarray] = None
    frame_rate: float = DEFAULT_FRAME_RATE

    def __post_init__(self):
        t = np.array(self.timestamps, dtype=float).reshape(-1)
        names = tuple(str(n) for n in self.names)
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 3 or pos.shape[2] != self.ndim:
            raise TrajectoryFormatError(
                f"positions must have shape (T, K, {self.ndim}), got {pos.shape}"
            )
        if pos.shape[0] != t.shape[0] or pos.shape[1] != len(names):
            raise TrajectoryFormatError(
                f"positions shape {pos.shape} does not match "
                f"{t.shape[0]} timestamps x {len(names)} names"
            )
        if len(set(names)) != len(names):
            raise TrajectoryFormatError("keypoint names must be unique")
        if not np.all(np.isfinite(t)):
            raise TrajectoryFormatError("timestamps must be finite")
        bad = np.nonzero(np.diff(t) <= 0)[0]
        if bad.size:
            raise TrajectoryFormatError("timestamps not strictly increasing", row=int(bad[0]) + 2)

        nan = np.isnan(pos)
        missing = nan.all(axis=2)
        partial = nan.any(axis=2) & ~missing
        if partial.any():
            row = int(np.nonzero(partial.any(axis=1))[0][0]) + 1
            raise TrajectoryFormatError("partially missing coordinates", row=row)
        if np.isinf(pos).any():
            row = int(np.nonzero(np.isinf(pos).any(axis=(1, 2)))[0][0]) + 1
            raise TrajectoryFormatError("non-finite coordinate", row=row)

        if self.confidences is None:
            conf = np.where(missing, 0.0, 1.0)
        else:
            conf = np.array(self.confidences, dtype=float)
            if conf.shape != pos.shape[:2]:
                raise TrajectoryFormatError(
                    f"confidences shape {conf.shape} does not match positions {pos.shape[:2]}"
                )
            out = ~((conf >= 0.0) & (conf <= 1.0))
            if out.any():
                row = int(np.nonzero(out.any(axis=1))[0][0]) + 1
                raise TrajectoryFormatError("confidence outside [0, 1]", row=row)
            conf = np.where(missing, 0.0, conf)

        fr = float(self.frame_rate)
        if not (fr > 0 and math.isfinite(fr)):
            raise TrajectoryFormatError(f"frame_rate must be positive, got {self.frame_rate}")

        for arr in (t, pos, conf):
            arr.flags.writeable = False
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "confidences", conf)
        object.__setattr__(self, "frame_rate", fr)

    @property
    def n_frames(self) -> int:
        return self.positions.shape[0]

    @property
    def n_keypoints(self) -> int:
        return self.positions.shape[1]

    @property
    def present(self) -> np.ndarray:
        """Boolean mask (T, K) of samples that carry a position."""
        return ~np.isnan(self.positions[..., 0])

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise MissingLandmarkError(f"keypoint {name!r} not in trajectory") from None

    def keypoint(self, name: str) -> np.ndarray:
        """Positions of one keypoint, shape (T, ndim), NaN where missing."""
        return self.positions[:, self.index(name)]

    def select(self, names: Sequence[str]) -> "KeypointTrajectory":
        idx = [self.index(n) for n in names]
        return dataclasses.replace(
            self,
            names=tuple(names),
            positions=self.positions[:, idx],
            confidences=self.confidences[:, idx],
        )

    def replace(self, **changes) -> "KeypointTrajectory":
        return dataclasses.replace(self, **changes)

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return (
            self.names == other.names
            and self.frame_rate == other.frame_rate
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.positions, other.positions, equal_nan=True)
            and np.array_equal(self.confidences, other.confidences)
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"{type(self).__name__}(n_frames={self.n_frames}, "
            f"names={list(self.names)!r}, frame_rate={self.frame_rate:g})"
        )


@dataclass(frozen=True, eq=False)
class PixelTrajectory(KeypointTrajectory):
    """Per-frame 2D pixel coordinates of detected keypoints."""

    ndim: ClassVar[int] = 2
    axes: ClassVar[Tuple[str, ...]] = ("u", "v")


def infer_frame_rate(timestamps) -> float:
    """Estimate the sampling rate from the median frame interval.

    Estimates within 1% of an integer are snapped to it, so timestamps
    rounded to a few decimals still report 60 Hz.
    """
    t = np.asarray(timestamps, dtype=float)
    if t.size < 2:
        return DEFAULT_FRAME_RATE
    rate = 1.0 / float(np.median(np.diff(t)))
    nearest = round(rate)
    if nearest > 0 and abs(rate - nearest) <= 0.01 * rate:
        return float(nearest)
    return rate


def _format(value: float) -> str:
    return repr(float(value))


def _parse_float(cell: str, row: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise TrajectoryFormatError(f"cannot parse {cell!r} in column {column!r}", row=row) from None
    if not math.isfinite(value):
        raise TrajectoryFormatError(f"non-finite value in column {column!r}", row=row)
    return value


def _detect_format(path, fmt):
    if fmt is not None:
        fmt = fmt.lower()
        if fmt not in ("csv", "jsonl"):
            raise ValueError(f"unknown trajectory format {fmt!r}")
        return fmt
    ext = os.path.splitext(str(path))[1].lower()
    if ext in (".jsonl", ".ndjson"):
        return "jsonl"
    return "csv"


def _build(cls, timestamps, names, values, confidences, frame_rate):
    t = np.asarray(timestamps, dtype=float)
    bad = np.nonzero(np.diff(t) <= 0)[0]
    if bad.size:
        raise TrajectoryFormatError(
            f"timestamp {t[bad[0] + 1]!r} does not increase", row=int(bad[0]) + 2
        )
    if frame_rate is None:
        frame_rate = infer_frame_rate(t)
    pos = np.asarray(values, dtype=float).reshape(len(t), len(names), cls.ndim)
    conf = np.asarray(confidences, dtype=float).reshape(len(t), len(names))
    return cls(t, tuple(names), pos, conf, frame_rate)


def _read_csv(text: str, cls):
    lines = text.splitlines()
    frame_rate = None
    while lines and lines[0].startswith("#"):
        comment = lines.pop(0)[1:].strip()
        if comment.startswith("frame_rate="):
            try:
                frame_rate = float(comment.split("=", 1)[1])
            except ValueError:
                raise TrajectoryFormatError(f"bad frame_rate comment {comment!r}") from None
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise TrajectoryFormatError("empty file") from None
    suffixes = cls.axes + ("c",)
    width = len(suffixes)
    if not header or header[0].strip() != "time" or (len(header) - 1) % width:
        raise TrajectoryFormatError(
            f"malformed header: expected 'time' followed by groups of "
            f"{','.join('_' + s for s in suffixes)}"
        )
    names = []
    for g in range(0, len(header) - 1, width):
        group = [h.strip() for h in header[1 + g : 1 + g + width]]
        stem = group[0][: -len(suffixes[0]) - 1]
        expected = [f"{stem}_{s}" for s in suffixes]
        if not stem or group != expected:
            raise TrajectoryFormatError(f"malformed header group {group}; expected {expected}")
        names.append(stem)

    times, values, confs = [], [], []
    for row, cells in enumerate(reader, start=1):
        if not cells:
            continue
        if len(cells) != len(header):
            raise TrajectoryFormatError(
                f"expected {len(header)} columns, found {len(cells)}", row=row
            )
        if not cells[0].strip():
            raise TrajectoryFormatError("missing timestamp", row=row)
        times.append(_parse_float(cells[0], row, "time"))
        for k, name in enumerate(names):
            group = [c.strip() for c in cells[1 + k * width : 1 + (k + 1) * width]]
            coords, conf = group[:-1], group[-1]
            if all(c == "" for c in coords):
                values.extend([math.nan] * cls.ndim)
                if conf != "" and _parse_float(conf, row, f"{name}_c") != 0.0:
                    raise TrajectoryFormatError(
                        f"missing sample for {name!r} has nonzero confidence", row=row
                    )
                confs.append(0.0)
                continue
            if any(c == "" for c in coords):
                raise TrajectoryFormatError(f"partially missing coordinates for {name!r}", row=row)
            values.extend(_parse_float(c, row, f"{name}_{s}") for c, s in zip(coords, suffixes))
            c = 1.0 if conf == "" else _parse_float(conf, row, f"{name}_c")
            if not 0.0 <= c <= 1.0:
                raise TrajectoryFormatError(f"confidence {c} for {name!r} outside [0, 1]", row=row)
            confs.append(c)
    return _build(cls, times, names, values, confs, frame_rate)


def _read_jsonl(text: str, cls):
    frame_rate = None
    names: Optional[List[str]] = None
    frames = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TrajectoryFormatError(f"invalid JSON: {exc.msg}", row=lineno) from None
        if not isinstance(obj, dict):
            raise TrajectoryFormatError("each line must be a JSON object", row=lineno)
        if "t" not in obj:
            if frames:
                raise TrajectoryFormatError("metadata line after frames", row=lineno)
            frame_rate = obj.get("frame_rate", frame_rate)
            names = list(obj["names"]) if "names" in obj else names
            continue
        frames.append(obj)

    if names is None:
        names = []
        for obj in frames:
            for n in obj.get("keypoints", {}):
                if n not in names:
                    names.append(n)
    width = cls.ndim + 1
    times, values, confs = [], [], []
    for row, obj in enumerate(frames, start=1):
        t = obj["t"]
        if not isinstance(t, (int, float)) or isinstance(t, bool) or not math.isfinite(t):
            raise TrajectoryFormatError(f"bad timestamp {t!r}", row=row)
        times.append(float(t))
        kps = obj.get("keypoints", {})
        if not isinstance(kps, dict):
            raise TrajectoryFormatError("'keypoints' must be an object", row=row)
        unknown = set(kps) - set(names)
        if unknown:
            raise TrajectoryFormatError(f"unknown keypoints {sorted(unknown)}", row=row)
        for name in names:
            sample = kps.get(name)
            if sample is None:
                values.extend([math.nan] * cls.ndim)
                confs.append(0.0)
                continue
            if not isinstance(sample, list) or len(sample) not in (cls.ndim, width):
                raise TrajectoryFormatError(
                    f"sample for {name!r} must be a list of {cls.ndim} or {width} numbers", row=row
                )
            if any(v is None for v in sample[: cls.ndim]):
                raise TrajectoryFormatError(f"partially missing coordinates for {name!r}", row=row)
            try:
                coords = [float(v) for v in sample[: cls.ndim]]
                c = float(sample[cls.ndim]) if len(sample) == width else 1.0
            except (TypeError, ValueError):
                raise TrajectoryFormatError(f"non-numeric sample for {name!r}", row=row) from None
            if not all(math.isfinite(v) for v in coords):
                raise TrajectoryFormatError(f"non-finite coordinate for {name!r}", row=row)
            if not 0.0 <= c <= 1.0:
                raise TrajectoryFormatError(f"confidence {c} for {name!r} outside [0, 1]", row=row)
            values.extend(coords)
            confs.append(c)
    return _build(cls, times, names, values, confs, frame_rate)


def load_trajectory(path, format=None, kind="3d"):
    """Read a trajectory file.

    Parameters
    ----------
    path : path-like
    format : {"csv", "jsonl"}, optional
        Inferred from the extension when omitted.
    kind : {"3d", "2d"}
        ``"2d"`` returns a :class:`PixelTrajectory`.

    Raises
    ------
    TrajectoryFormatError
        On malformed headers, non-monotonic timestamps, shape mismatches or
        out-of-range confidences; the message names the data row.
    """
    fmt = _detect_format(path, format)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        text = fh.read()
    return loads_trajectory(text, fmt, kind)


def loads_trajectory(text: str, format="csv", kind="3d"):
    cls = _kind_class(kind)
    if format == "jsonl":
        return _read_jsonl(text, cls)
    return _read_csv(text, cls)


def _kind_class(kind):
    if kind in ("3d", 3, KeypointTrajectory):
        return KeypointTrajectory
    if kind in ("2d", 2, PixelTrajectory):
        return PixelTrajectory
    raise ValueError(f"unknown trajectory kind {kind!r}")


def dumps_trajectory(traj: KeypointTrajectory, format="csv") -> str:
    """Serialize losslessly; floats use the shortest round-trip repr."""
    if format == "jsonl":
        return _dumps_jsonl(traj)
    suffixes = traj.axes + ("c",)
    buf = io.StringIO()
    buf.write(f"# frame_rate={_format(traj.frame_rate)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["time"] + [f"{n}_{s}" for n in traj.names for s in suffixes])
    present = traj.present
    for i in range(traj.n_frames):
        row = [_format(traj.timestamps[i])]
        for k in range(traj.n_keypoints):
            if present[i, k]:
                row.extend(_format(v) for v in traj.positions[i, k])
                row.append(_format(traj.confidences[i, k]))
            else:
                row.extend([""] * len(suffixes))
        writer.writerow(row)
    return buf.getvalue()


def _dumps_jsonl(traj):
    lines = [json.dumps({"frame_rate": traj.frame_rate, "names": list(traj.names)})]
    present = traj.present
    for i in range(traj.n_frames):
        kps = {}
        for k, name in enumerate(traj.names):
            if present[i, k]:
                kps[name] = [float(v) for v in traj.positions[i, k]] + [
                    float(traj.confidences[i, k])
                ]
            else:
                kps[name] = None
        lines.append(json.dumps({"t": float(traj.timestamps[i]), "keypoints": kps}))
    return "\n".join(lines) + "\n"


def save_trajectory(traj: KeypointTrajectory, path, format=None) -> None:
    fmt = _detect_format(path, format)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dumps_trajectory(traj, fmt))


@dataclass(frozen=True)
class GapSummary:
    missing: int
    longest_run: int


def gap_report(traj: KeypointTrajectory) -> Dict[str, GapSummary]:
    """Missing-sample count and longest consecutive missing run per keypoint."""
    missing = ~traj.present
    report = {}
    for k, name in enumerate(traj.names):
        col = missing[:, k].astype(np.int8)
        # run lengths from the boundaries of the padded mask
        edges = np.diff(np.concatenate(([0], col, [0])))
        starts = np.nonzero(edges == 1)[0]
        stops = np.nonzero(edges == -1)[0]
        longest = int((stops - starts).max()) if starts.size else 0
        report[name] = GapSummary(int(col.sum()), longest)
    return report


def align_nearest(
    reference: KeypointTrajectory, test: KeypointTrajectory, tolerance: Optional[float] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Pair frames by nearest timestamp.

    Returns index arrays ``(ref_idx, test_idx)`` of matched frames. A match
    requires the timestamps to differ by at most ``tolerance`` (default half
    the reference frame period).

    Raises
    ------
    TrajectoryFormatError
        If the two time ranges do not overlap or nothing matches.
    """
    tr, tt = reference.timestamps, test.timestamps
    if tolerance is None:
        tolerance = 0.5 / reference.frame_rate
    if tr.size == 0 or tt.size == 0 or tr[-1] < tt[0] - tolerance or tt[-1] < tr[0] - tolerance:
        raise TrajectoryFormatError("reference and test time ranges do not overlap")
    pos = np.searchsorted(tt, tr)
    lo = np.clip(pos - 1, 0, tt.size - 1)
    hi = np.clip(pos, 0, tt.size - 1)
    pick = np.where(np.abs(tt[lo] - tr) <= np.abs(tt[hi] - tr), lo, hi)
    ok = np.abs(tt[pick] - tr) <= tolerance + 1e-12
    if not ok.any():
        raise TrajectoryFormatError("no frames align within half a frame period")
    return np.nonzero(ok)[0], pick[ok]
