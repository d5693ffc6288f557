"""Trajectory comparison plots as standalone SVG.

Ground truth, odometry and the filter estimate are drawn as polylines in a
shared world frame (north up) with a legend and a scale bar.  Output is a
pure function of the input rows, so the same steps file always yields the
same bytes.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import InputParseError

SERIES = (
    ("gt", "ground truth", "#222222"),
    ("odom", "odometry", "#d62728"),
    ("est", "estimate", "#1f77b4"),
)


def read_steps(path) -> dict[str, np.ndarray]:
    """Columns ``<series>_e`` / ``<series>_n`` from a steps file, as (N, 2) arrays per series."""
    path = Path(path)
    try:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
    except OSError as exc:
        raise InputParseError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise InputParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    out = {}
    for key, _, _ in SERIES:
        cols = (f"{key}_e", f"{key}_n")
        if not all(c in header for c in cols):
            continue
        ie, in_ = header.index(cols[0]), header.index(cols[1])
        try:
            xy = np.array([(float(r[ie]), float(r[in_])) for r in rows[1:] if r], dtype=np.float64)
        except (ValueError, IndexError):
            raise InputParseError(f"{path}: bad numeric row") from None
        xy = xy.reshape(-1, 2)
        xy = xy[np.all(np.isfinite(xy), axis=1)]
        if len(xy):
            out[key] = xy
    if not out:
        raise InputParseError(f"{path}: no trajectory rows")
    return out


def _nice_length(span: float) -> float:
    """Largest 1/2/5 x 10^k not above a fifth of ``span``."""
    target = max(span / 5.0, 1e-9)
    base = 10.0 ** math.floor(math.log10(target))
    for m in (5.0, 2.0, 1.0):
        if m * base <= target:
            return m * base
    return base


def render_svg(series: dict[str, np.ndarray], width: int = 800, margin: int = 40) -> str:
    if not series:
        raise ValueError("nothing to plot")
    pts = np.vstack(list(series.values()))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1.0))
    inner = width - 2 * margin
    scale = inner / span
    height = int(math.ceil((hi[1] - lo[1]) * scale)) + 2 * margin + 40

    def sx(e):
        return margin + (e - lo[0]) * scale

    def sy(n):
        return margin + (hi[1] - n) * scale

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    for key, label, color in SERIES:
        xy = series.get(key)
        if xy is None:
            continue
        coords = " ".join(f"{sx(e):.2f},{sy(n):.2f}" for e, n in xy)
        out.append(f'<polyline id="{key}" fill="none" stroke="{color}" stroke-width="1.5" '
                   f'points="{coords}"/>')
        if len(np.unique(xy, axis=0)) < 2:
            # a polyline with one distinct vertex draws nothing
            for e, n in np.unique(xy, axis=0):
                out.append(f'<circle cx="{sx(e):.2f}" cy="{sy(n):.2f}" r="3" fill="{color}"/>')

    ly = 16
    for key, label, color in SERIES:
        if key not in series:
            continue
        out.append(f'<line x1="{margin}" y1="{ly}" x2="{margin + 24}" y2="{ly}" stroke="{color}" stroke-width="3"/>')
        out.append(f'<text x="{margin + 30}" y="{ly + 4}" font-family="sans-serif" font-size="12">'
                   f'{escape(label)}</text>')
        ly += 16

    bar = _nice_length(span)
    x0, y0 = margin, height - 20
    x1 = x0 + bar * scale
    label = f"{bar:g} m"
    out.append(f'<g id="scale"><line x1="{x0}" y1="{y0}" x2="{x1:.2f}" y2="{y0}" stroke="black" stroke-width="2"/>'
               f'<line x1="{x0}" y1="{y0 - 4}" x2="{x0}" y2="{y0 + 4}" stroke="black"/>'
               f'<line x1="{x1:.2f}" y1="{y0 - 4}" x2="{x1:.2f}" y2="{y0 + 4}" stroke="black"/>'
               f'<text x="{(x0 + x1) / 2:.2f}" y="{y0 - 6}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12">{label}</text></g>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_steps(steps_path, svg_path) -> None:
    Path(svg_path).write_text(render_svg(read_steps(steps_path)))
