"""Grouped bar charts written as plain SVG text.

Output depends only on the inputs (fixed float formatting, no timestamps or
random ids), so charts are byte-stable across runs.
"""

from __future__ import annotations

import math
from typing import Mapping, Optional, Sequence
from xml.sax.saxutils import escape

PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860")


def _f(x: float) -> str:
    return f"{x:.2f}"


def grouped_bar_svg(
    categories: Sequence[str],
    series: Mapping[str, Sequence[Optional[float]]],
    title: str = "",
    ylabel: str = "%",
    ymax: Optional[float] = None,
    width: int = 760,
    height: int = 380,
) -> str:
    """Bars grouped by category, one colour per series. ``None`` values draw nothing."""
    names = list(series)
    for n in names:
        if len(series[n]) != len(categories):
            raise ValueError(f"series {n!r} has {len(series[n])} values for {len(categories)} categories")
    vals = [v for n in names for v in series[n] if v is not None]
    top = ymax if ymax is not None else (max(vals) if vals else 1.0)
    if not top > 0:
        top = 1.0
    top = _nice(top)
    left, right, upper, lower = 60, 20, 40, 70
    pw, ph = width - left - right, height - upper - lower
    group_w = pw / max(len(categories), 1)
    bar_w = group_w * 0.8 / max(len(names), 1)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{_f(width / 2)}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for k in range(6):
        v = top * k / 5
        y = upper + ph - ph * v / top
        out.append(f'<line x1="{left}" y1="{_f(y)}" x2="{left + pw}" y2="{_f(y)}" stroke="#dddddd"/>')
        out.append(f'<text x="{left - 6}" y="{_f(y + 4)}" text-anchor="end">{v:g}</text>')
    out.append(
        f'<text x="14" y="{_f(upper + ph / 2)}" text-anchor="middle" '
        f'transform="rotate(-90 14 {_f(upper + ph / 2)})">{escape(ylabel)}</text>'
    )
    for i, cat in enumerate(categories):
        x0 = left + i * group_w + group_w * 0.1
        for j, n in enumerate(names):
            v = series[n][i]
            if v is None or not math.isfinite(v):
                continue
            h = ph * max(0.0, min(v, top)) / top
            out.append(
                f'<rect x="{_f(x0 + j * bar_w)}" y="{_f(upper + ph - h)}" width="{_f(bar_w)}" '
                f'height="{_f(h)}" fill="{PALETTE[j % len(PALETTE)]}"/>'
            )
        out.append(
            f'<text x="{_f(left + (i + 0.5) * group_w)}" y="{upper + ph + 16}" '
            f'text-anchor="middle">{escape(cat)}</text>'
        )
    out.append(f'<line x1="{left}" y1="{upper + ph}" x2="{left + pw}" y2="{upper + ph}" stroke="black"/>')
    for j, n in enumerate(names):
        x = left + j * 150
        y = height - 18
        out.append(f'<rect x="{x}" y="{y - 9}" width="10" height="10" fill="{PALETTE[j % len(PALETTE)]}"/>')
        out.append(f'<text x="{x + 14}" y="{y}">{escape(n)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _nice(v: float) -> float:
    exp = math.floor(math.log10(v))
    for m in (1, 2, 2.5, 5, 10):
        if m * 10**exp >= v:
            return m * 10**exp
    return 10 ** (exp + 1)


def save_svg(svg: str, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(svg)
