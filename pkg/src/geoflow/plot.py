"""Static SVG rendering of qubit trajectories inside the Bloch ball."""
from __future__ import annotations

import numpy as np

from .errors import DimensionError

PANEL = 300
MARGIN = 20
MAX_POINTS = 2000
PLANES = ((0, 1), (0, 2), (1, 2))


def _fmt(v: float) -> str:
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


def bloch_svg(points, title: str = "") -> str:
    """Three cross-sections (x1x2, x1x3, x2x3) of the unit ball with the trajectory.

    ``points`` are Bloch vectors (``rho = (I + x.sigma)/2``), one row per time.
    The output depends only on the input values, so identical input gives identical bytes.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DimensionError(f"Bloch plots need 3 coordinates per row (n = 2), got shape {pts.shape}")
    if pts.shape[0] == 0:
        raise DimensionError("empty trajectory")
    if pts.shape[0] > MAX_POINTS:
        idx = np.unique(np.linspace(0, pts.shape[0] - 1, MAX_POINTS).round().astype(int))
        pts = pts[idx]
    constant = bool(np.all(np.abs(pts - pts[0]) < 1e-12))

    width = 3 * PANEL + 4 * MARGIN
    height = PANEL + 3 * MARGIN
    r = PANEL / 2 - 10
    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        safe = title.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        out.append(f'<text x="{MARGIN}" y="{MARGIN - 5}" font-family="sans-serif" font-size="12">{safe}</text>')
    for k, (i, j) in enumerate(PLANES):
        cx = MARGIN + k * (PANEL + MARGIN) + PANEL / 2
        cy = 2 * MARGIN + PANEL / 2

        def sx(v):
            return cx + r * v

        def sy(v):
            return cy - r * v

        out.append(f'<g id="panel-x{i + 1}x{j + 1}">')
        out.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(r)}" fill="none" stroke="#888" stroke-width="1"/>')
        out.append(f'<line x1="{_fmt(cx - r)}" y1="{_fmt(cy)}" x2="{_fmt(cx + r)}" y2="{_fmt(cy)}" stroke="#ccc"/>')
        out.append(f'<line x1="{_fmt(cx)}" y1="{_fmt(cy - r)}" x2="{_fmt(cx)}" y2="{_fmt(cy + r)}" stroke="#ccc"/>')
        out.append(f'<text x="{_fmt(cx + r - 20)}" y="{_fmt(cy - 4)}" font-family="sans-serif" font-size="11">x{i + 1}</text>')
        out.append(f'<text x="{_fmt(cx + 4)}" y="{_fmt(cy - r + 12)}" font-family="sans-serif" font-size="11">x{j + 1}</text>')
        if constant:
            out.append(f'<circle class="marker" cx="{_fmt(sx(pts[0, i]))}" cy="{_fmt(sy(pts[0, j]))}" r="4" fill="#333"/>')
        else:
            coords = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(pts[:, i], pts[:, j]))
            out.append(f'<polyline points="{coords}" fill="none" stroke="#1f5fbf" stroke-width="1.5"/>')
            out.append(f'<circle class="start" cx="{_fmt(sx(pts[0, i]))}" cy="{_fmt(sy(pts[0, j]))}" r="4" fill="#2a9d2a"/>')
            ex, ey = sx(pts[-1, i]), sy(pts[-1, j])
            out.append(f'<rect class="end" x="{_fmt(ex - 4)}" y="{_fmt(ey - 4)}" width="8" height="8" fill="#c0392b"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
