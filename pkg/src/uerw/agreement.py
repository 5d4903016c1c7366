"""Frame-level octant agreement and Bland-Altman statistics between two systems.

The reference system supplies the denominator: a frame belongs to octant
``o`` when the reference labels it ``o``. Frames missing in either stream are
dropped pairwise before counting.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ValidationError
from .workspace import ANALYZED_OCTANTS, Octant, WorkspaceReport, octant_codes

AXES = ("ML", "AP", "SI")
# bit of the octant code that carries each axis sign
_AXIS_BITS = {"ML": 1, "AP": 2, "SI": 4}
LOA_Z = 1.96
MISSING = -1


@dataclass(frozen=True, eq=False)
class OctantSequence:
    """Per-frame octant codes (``-1`` = missing) with their timestamps."""

    timestamps: np.ndarray
    codes: np.ndarray

    def __post_init__(self):
        t = np.array(self.timestamps, dtype=float).reshape(-1)
        c = np.array(self.codes, dtype=np.int64).reshape(-1)
        if t.shape != c.shape:
            raise ValidationError(f"{t.size} timestamps for {c.size} labels")
        if np.any((c < MISSING) | (c > 7)):
            raise ValidationError("octant codes must lie in 0..7 or be -1 for missing")
        t.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "codes", c)

    def __len__(self) -> int:
        return self.codes.size

    @property
    def labels(self) -> List[Optional[Octant]]:
        return [None if c < 0 else Octant(int(c)) for c in self.codes]

    @classmethod
    def from_labels(cls, labels: Sequence, timestamps=None) -> "OctantSequence":
        """Build from Octant members, octant label strings, ints or None."""
        codes = []
        for lab in labels:
            if lab is None:
                codes.append(MISSING)
            elif isinstance(lab, str):
                codes.append(int(Octant.from_label(lab)))
            else:
                codes.append(int(Octant(int(lab))))
        if timestamps is None:
            timestamps = np.arange(len(codes), dtype=float)
        return cls(timestamps, codes)


def octant_sequence(wrist_local, timestamps=None) -> OctantSequence:
    """Octant label of every frame of a torso-local wrist path (T, 3)."""
    w = np.asarray(wrist_local, dtype=float)
    if w.ndim != 2 or w.shape[1] != 3:
        raise ValidationError(f"wrist path must have shape (T, 3), got {w.shape}")
    if timestamps is None:
        timestamps = np.arange(w.shape[0], dtype=float)
    return OctantSequence(timestamps, octant_codes(w))


@dataclass(frozen=True)
class OctantAgreement:
    octant: Octant
    frames: int
    agreements: int
    # tallies per axis, keyed like AXES
    axis_tallies: Tuple[int, int, int]

    @property
    def disagreements(self) -> int:
        return self.frames - self.agreements

    @property
    def agreement(self) -> Optional[float]:
        return None if self.frames == 0 else 100.0 * self.agreements / self.frames

    @property
    def disagreement(self) -> Optional[float]:
        return None if self.frames == 0 else 100.0 * self.disagreements / self.frames

    def directional(self, axis: str) -> Optional[float]:
        if self.frames == 0:
            return None
        return 100.0 * self.axis_tallies[AXES.index(axis)] / self.frames


@dataclass(frozen=True)
class AgreementReport:
    octants: Dict[Octant, OctantAgreement]
    excluded_frames: int

    def agreement(self, octant) -> Optional[float]:
        return self.octants[Octant(octant)].agreement

    def directional(self, octant, axis: str) -> Optional[float]:
        return self.octants[Octant(octant)].directional(axis)

    def rows(self, octants: Iterable[Octant] = tuple(Octant)) -> List[dict]:
        """Tidy rows ``{octant, metric, value}``; rates are percentages."""
        out = []
        for o in octants:
            s = self.octants[Octant(o)]
            metrics = [("frames", str(s.frames)), ("agreement", _fmt(s.agreement))]
            metrics += [(f"error_{a}", _fmt(s.directional(a))) for a in AXES]
            out += [{"octant": Octant(o).label, "metric": m, "value": v} for m, v in metrics]
        return out


def _fmt(x: Optional[float]) -> str:
    return "n/a" if x is None else f"{x:.6f}"


def _paired(ref: OctantSequence, test: OctantSequence) -> Tuple[np.ndarray, np.ndarray, int]:
    if len(ref) != len(test):
        raise ValidationError(f"sequence lengths differ: {len(ref)} vs {len(test)}")
    if not np.array_equal(ref.timestamps, test.timestamps):
        raise ValidationError("sequences have different timestamps")
    keep = (ref.codes >= 0) & (test.codes >= 0)
    return ref.codes[keep], test.codes[keep], int((~keep).sum())


def compare_sequences(ref: OctantSequence, test: OctantSequence) -> AgreementReport:
    """Agreement and per-axis directional tallies for every reference octant.

    A disagreeing frame adds one tally to each axis whose sign differs
    between the two labels.
    """
    r, t, excluded = _paired(ref, test)
    diff = r ^ t
    out = {}
    for o in Octant:
        sel = r == int(o)
        d = diff[sel]
        tallies = tuple(int(np.count_nonzero(d & _AXIS_BITS[a])) for a in AXES)
        out[o] = OctantAgreement(o, int(sel.sum()), int(np.count_nonzero(d == 0)), tallies)
    return AgreementReport(out, excluded)


def agreement_rate(ref: OctantSequence, test: OctantSequence) -> Dict[Octant, Optional[float]]:
    """Percent of each reference octant's frames where the test label matches (None if unoccupied)."""
    rep = compare_sequences(ref, test)
    return {o: s.agreement for o, s in rep.octants.items()}


def directional_error_rate(ref: OctantSequence, test: OctantSequence) -> Dict[Octant, Dict[str, Optional[float]]]:
    rep = compare_sequences(ref, test)
    return {o: {a: s.directional(a) for a in AXES} for o, s in rep.octants.items()}


@dataclass(frozen=True)
class BlandAltmanResult:
    n: int
    mean: float
    sd: float

    @property
    def lower(self) -> float:
        return self.mean - LOA_Z * self.sd

    @property
    def upper(self) -> float:
        return self.mean + LOA_Z * self.sd

    @property
    def limits(self) -> Tuple[float, float]:
        return self.lower, self.upper

    def format_row(self, group: str, system: str) -> str:
        """Table row like ``All Octants / Frontal / -0.70 / -11.70 – 12.90``."""
        return f"{group} / {system} / {_num(self.mean)} / {_num(self.lower)} – {_num(self.upper)}"


def _num(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def bland_altman(pairs) -> BlandAltmanResult:
    """Bias and 95% limits of agreement of ``test - reference`` over (test, reference) pairs.

    Uses the sample standard deviation (n - 1 denominator).
    """
    arr = np.asarray(list(pairs), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValidationError("pairs must be a sequence of (test, reference) values")
    if arr.shape[0] < 2:
        raise ValidationError("Bland-Altman needs at least 2 pairs")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("Bland-Altman pairs must be finite")
    d = arr[:, 0] - arr[:, 1]
    mean = math.fsum(d) / d.size
    sd = math.sqrt(math.fsum((d - mean) ** 2) / (d.size - 1))
    return BlandAltmanResult(int(d.size), mean, sd)


def bland_altman_reports(
    test: Sequence[WorkspaceReport],
    reference: Sequence[WorkspaceReport],
    octants: Iterable[Octant] = ANALYZED_OCTANTS,
) -> Dict[str, BlandAltmanResult]:
    """Per-octant and pooled (``"All Octants"``) statistics over matched trial reports.

    Octants that are not applicable in either report of a pair are skipped.
    Groups with fewer than two usable pairs are left out.
    """
    if len(test) != len(reference):
        raise ValidationError("need one reference report per test report")
    groups: Dict[str, List[Tuple[float, float]]] = {}
    pooled = []
    for o in octants:
        o = Octant(o)
        pairs = []
        for a, b in zip(test, reference):
            pa, pb = a.percent(o), b.percent(o)
            if pa is not None and pb is not None:
                pairs.append((pa, pb))
        groups[o.label] = pairs
        pooled += pairs
    out = {"All Octants": pooled, **groups}
    return {k: bland_altman(v) for k, v in out.items() if len(v) >= 2}


def bland_altman_rows(results: Mapping[str, BlandAltmanResult], system: str = "") -> List[dict]:
    rows = []
    for group, res in results.items():
        for metric, value in (
            ("n", str(res.n)),
            ("mean_difference", f"{res.mean:.6f}"),
            ("sd_difference", f"{res.sd:.6f}"),
            ("loa_lower", f"{res.lower:.6f}"),
            ("loa_upper", f"{res.upper:.6f}"),
        ):
            rows.append({"octant": group, "system": system, "metric": metric, "value": value})
    return rows


def write_tidy_csv(rows: Sequence[Mapping[str, str]], path_or_buf=None, fields: Optional[Sequence[str]] = None) -> str:
    """Write rows as CSV with LF line endings; returns the text."""
    if fields is None:
        fields = list(rows[0].keys()) if rows else ["octant", "metric", "value"]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: row[k] for k in fields})
    text = buf.getvalue()
    if path_or_buf is not None:
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    return text
