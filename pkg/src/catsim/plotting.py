"""Minimal SVG line plots: axes, tick labels, polylines and point markers."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = (70, 20, 30, 55)  # left, right, top, bottom
COLORS = ("#1f4e9a", "#c0392b", "#2e8b57", "#7d3c98")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    out = []
    x = first
    while x <= hi + 1e-9 * step:
        out.append(0.0 if abs(x) < 1e-12 * step else x)
        x += step
    return out


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def line_plot(x, series, xlabel: str = "", ylabel: str = "", title: str = "") -> str:
    """Render ``series`` against ``x`` as an SVG document.

    ``series`` is a list of (label, y, style) with style "line" or "points".
    """
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(y, dtype=float) for _, y, _ in series]
    x0, x1 = float(x.min()), float(x.max())
    y0 = min(0.0, min(float(y.min()) for y in ys))
    y1 = max(float(y.max()) for y in ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    left, right, top, bottom = MARGIN
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + (1.0 - (v - y0) / (y1 - y0)) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        X = px(t)
        parts.append(f'<line x1="{X:.2f}" y1="{top + ph}" x2="{X:.2f}" y2="{top + ph + 5}" stroke="black"/>')
        parts.append(f'<text x="{X:.2f}" y="{top + ph + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y0, y1):
        Y = py(t)
        parts.append(f'<line x1="{left - 5}" y1="{Y:.2f}" x2="{left}" y2="{Y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{left - 8}" y="{Y + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    if xlabel:
        parts.append(f'<text x="{left + pw / 2}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        parts.append(
            f'<text x="16" y="{top + ph / 2}" text-anchor="middle" '
            f'transform="rotate(-90 16 {top + ph / 2})">{escape(ylabel)}</text>'
        )
    if title:
        parts.append(f'<text x="{left + pw / 2}" y="18" text-anchor="middle">{escape(title)}</text>')

    for i, ((label, _, style), y) in enumerate(zip(series, ys)):
        color = COLORS[i % len(COLORS)]
        if style == "line":
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        else:
            for a, b in zip(x, y):
                parts.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2.2" fill="{color}"/>')
        ly = top + 14 + 16 * i
        parts.append(f'<text x="{left + pw - 8}" y="{ly}" text-anchor="end" fill="{color}">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
